//! Synthetic regression streams for driving the learner outside the control
//! loop, plus the box-constrained window oracle used by the adaptive-regret
//! checks.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::barrier::{CovariateBatch, DecisionDomain};
use crate::error::{Error, Result};
use crate::flh::PrunePolicy;
use crate::prodr::{derive_config, DelayedProdr, ProdrConfig};

/// A generated stream: per-round batches and the drifting ground-truth
/// predictor used as the comparator sequence.
#[derive(Debug, Clone)]
pub struct RegressionStream {
    pub batches: Vec<CovariateBatch>,
    pub comparator: Vec<DVector<f64>>,
    pub domain: DecisionDomain,
    pub config_template: StreamBounds,
}

/// Assumption-level bounds realized by the generator.
#[derive(Debug, Clone, Copy)]
pub struct StreamBounds {
    pub alpha_row: f64,
    pub sigma_b: f64,
    pub chi: f64,
    pub r_tilde: f64,
    pub p: usize,
    pub d: usize,
}

/// Piecewise-constant drift: the ground truth jumps between `segments`
/// random box points; targets carry bounded uniform noise.
pub fn drifting_stream(
    n: usize,
    d: usize,
    p: usize,
    segments: usize,
    noise: f64,
    seed: u64,
) -> Result<RegressionStream> {
    if n == 0 || d == 0 || p == 0 || segments == 0 {
        return Err(Error::bounds("stream dimensions must be positive"));
    }
    let r_tilde = 1.0;
    let domain = DecisionDomain::Box { r_tilde, dim: d };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors: Vec<DVector<f64>> = (0..segments)
        .map(|_| DVector::from_fn(d, |_, _| rng.gen_range(-0.8..0.8)))
        .collect();
    let seg_len = n.div_ceil(segments);
    let mut batches = Vec::with_capacity(n);
    let mut comparator = Vec::with_capacity(n);
    for t in 0..n {
        let u_star = &anchors[(t / seg_len).min(segments - 1)];
        // Rows with L1 norm scaled into (0, 1].
        let a = DMatrix::from_fn(p, d, |_, _| rng.gen_range(-1.0..1.0));
        let a = {
            let mut a = a;
            for i in 0..p {
                let l1: f64 = a.row(i).iter().map(|v: &f64| v.abs()).sum();
                if l1 > 1e-12 {
                    let scale = rng.gen_range(0.5..1.0) / l1;
                    for j in 0..d {
                        a[(i, j)] *= scale;
                    }
                }
            }
            a
        };
        let b = &a * u_star
            + DVector::from_fn(p, |_, _| rng.gen_range(-noise..noise.max(1e-12)));
        batches.push(CovariateBatch::new(a, b)?);
        comparator.push(u_star.clone());
    }
    let bounds = StreamBounds {
        alpha_row: 1.0,
        sigma_b: p as f64 * (r_tilde + noise),
        chi: d as f64 * r_tilde,
        r_tilde,
        p,
        d,
    };
    Ok(RegressionStream {
        batches,
        comparator,
        domain,
        config_template: bounds,
    })
}

impl RegressionStream {
    pub fn n(&self) -> usize {
        self.batches.len()
    }

    /// Parameter assignment from the realized assumption bounds.
    pub fn derive_config(&self, tau: usize) -> Result<ProdrConfig> {
        let b = &self.config_template;
        derive_config(b.p, b.d, b.chi, b.sigma_b, b.alpha_row, b.r_tilde, tau)
    }
}

/// Outcome of running the learner over a stream.
#[derive(Debug, Clone)]
pub struct StreamRun {
    pub plays: Vec<DVector<f64>>,
    pub learner_losses: Vec<f64>,
    pub comparator_losses: Vec<f64>,
    pub barrier: Vec<f64>,
    pub weight_entropy: Vec<f64>,
}

/// Drive the delayed learner over the stream with feedback delay tau
/// (tau = 1 is the non-delayed protocol).
pub fn run_stream(
    stream: &RegressionStream,
    config: ProdrConfig,
    prune: PrunePolicy,
) -> Result<StreamRun> {
    let mut learner = DelayedProdr::new(config, stream.domain.clone(), prune)?;
    let tau = config.tau;
    let n = stream.n();
    let mut out = StreamRun {
        plays: Vec::with_capacity(n),
        learner_losses: Vec::with_capacity(n),
        comparator_losses: Vec::with_capacity(n),
        barrier: Vec::with_capacity(n),
        weight_entropy: Vec::with_capacity(n),
    };
    for t in 1..=n {
        let delayed = if t > tau {
            Some(&stream.batches[t - tau - 1])
        } else {
            None
        };
        let (play, diag) = learner.step(&stream.batches[t - 1].a, delayed)?;
        out.learner_losses.push(stream.batches[t - 1].loss(&play));
        out.comparator_losses
            .push(stream.batches[t - 1].loss(&stream.comparator[t - 1]));
        out.barrier.push(diag.barrier);
        out.weight_entropy.push(diag.weight_entropy);
        out.plays.push(play);
    }
    Ok(out)
}

/// Best fixed box point over a window of batches: cyclic coordinate descent
/// on the accumulated normal equations with clamping.
pub fn best_fixed_in_window(
    batches: &[CovariateBatch],
    window: (usize, usize),
    r_tilde: f64,
) -> Result<(DVector<f64>, f64)> {
    let (a, b) = window;
    if a == 0 || b > batches.len() || a > b {
        return Err(Error::dims(format!("bad window ({a}, {b})")));
    }
    let d = batches[0].a.ncols();
    let mut h = DMatrix::zeros(d, d);
    let mut c = DVector::zeros(d);
    let mut k = 0.0;
    for t in (a - 1)..b {
        let batch = &batches[t];
        h += batch.a.transpose() * &batch.a;
        c += batch.a.transpose() * &batch.b;
        k += batch.b.norm_squared();
    }
    let mut u: DVector<f64> = DVector::zeros(d);
    for _ in 0..2000 {
        let mut max_change = 0.0f64;
        for j in 0..d {
            if h[(j, j)] <= 1e-14 {
                continue;
            }
            let mut num = c[j];
            for l in 0..d {
                if l != j {
                    num -= h[(j, l)] * u[l];
                }
            }
            let next: f64 = (num / h[(j, j)]).clamp(-r_tilde, r_tilde);
            max_change = max_change.max((next - u[j]).abs());
            u[j] = next;
        }
        if max_change < 1e-12 {
            break;
        }
    }
    let value = (u.transpose() * &h * &u)[(0, 0)] - 2.0 * c.dot(&u) + k;
    Ok((u, value.max(0.0)))
}

/// Windowed static regret of a stream run over the supplied windows.
pub fn windowed_static_regret(
    batches: &[CovariateBatch],
    learner_losses: &[f64],
    windows: &[(usize, usize)],
    r_tilde: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    let mut prefix = Vec::with_capacity(learner_losses.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for l in learner_losses {
        acc += l;
        prefix.push(acc);
    }
    let mut table = Vec::with_capacity(windows.len());
    for &(a, b) in windows {
        let (_, best) = best_fixed_in_window(batches, (a, b), r_tilde)?;
        table.push((a, b, prefix[b] - prefix[a - 1] - best));
    }
    Ok(table)
}
