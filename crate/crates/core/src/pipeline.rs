//! Reduction from LQR control to delayed minibatch regression: Kronecker
//! covariates from recent disturbances, delayed feedforward targets on the
//! effective range of the steady-state cost matrix, and the closed control
//! loop that deflattens each regression play into a disturbance-action
//! policy.

use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

use crate::barrier::{CovariateBatch, DecisionDomain};
use crate::dap::{dap_control, deflatten, DapClass, DapParams};
use crate::error::{Error, Result};
use crate::flh::PrunePolicy;
use crate::linalg::{induced_one_norm, op_norm};
use crate::lqr::LqrSystem;
use crate::prodr::{finish_config, DelayedProdr, ProdrConfig, RoundDiagnostics};

/// Disturbance norms may exceed one by at most this much.
pub const W_NORM_TOL: f64 = 1e-9;

/// Covariate matrix [w_{t-1}' ... w_{t-m}'] (x) Lambda^{1/2} U restricted to
/// the effective range; `history` holds (w_{t-1}, ..., w_{t-m}) and shorter
/// histories are zero-padded.
pub fn build_covariate(
    history: &[DVector<f64>],
    sys: &LqrSystem,
    class: DapClass,
) -> Result<DMatrix<f64>> {
    let factor = sys.consts.sigma_spectral.sqrt_factor(); // r x d_u
    let r = factor.nrows();
    let d_x = class.d_x;
    let d_u = class.d_u;
    let mut a = DMatrix::zeros(r, class.flat_dim());
    for (i, w) in history.iter().take(class.m).enumerate() {
        if w.len() != d_x {
            return Err(Error::dims("disturbance dimension mismatch"));
        }
        // Block i of the flattened vector is vec(M^[i]) column-major; the
        // product A z must equal sum_i Lambda^{1/2} U M^[i] w_{t-i}, so the
        // (col j of M) coefficient is w[j] times the factor columns.
        let base = i * d_u * d_x;
        for j in 0..d_x {
            for k in 0..d_u {
                for row in 0..r {
                    a[(row, base + j * d_u + k)] = w[j] * factor[(row, k)];
                }
            }
        }
    }
    Ok(a)
}

/// Delayed target b = Lambda^{1/2} U q_inf(w_{t+1..t+h}) on the effective
/// range.
pub fn build_bias(future: &[DVector<f64>], sys: &LqrSystem) -> DVector<f64> {
    let q = sys.q_inf(future);
    sys.consts.sigma_spectral.sqrt_factor() * q
}

/// Invert the state evolution: w_t = x_{t+1} - A x_t - B u_t, enforcing the
/// unit-norm contract.
pub fn recover_disturbance(
    x_t: &DVector<f64>,
    u_t: &DVector<f64>,
    x_next: &DVector<f64>,
    sys: &LqrSystem,
    round: usize,
) -> Result<DVector<f64>> {
    let w = x_next - &sys.spec.a * x_t - &sys.spec.b * u_t;
    let norm = w.norm();
    if norm > 1.0 + W_NORM_TOL {
        return Err(Error::DisturbanceBoundViolated { round, norm });
    }
    Ok(w)
}

/// Regression parameters from the closed-form instantiation:
/// alpha = sqrt(m |Sigma|_op), L = 4 G^2, R~ = R gamma sqrt(d_u ^ d_x)
/// floored at R so the box still encloses the policy set, and G built from
/// the spectral factors. With gamma = 1 the geometric tail sum is replaced
/// by its h-term truncation.
pub fn derive_lqr_config(sys: &LqrSystem, class: DapClass, tau: usize) -> Result<ProdrConfig> {
    let spectral = &sys.consts.sigma_spectral;
    let sqrt_factor = spectral.sqrt_factor();
    let inv_sqrt_factor = spectral.inv_sqrt_factor();
    let p = spectral.effective_rank.max(1);
    let d = class.flat_dim();
    let d_min = class.d_u.min(class.d_x) as f64;

    let r_tilde = class.r * (class.gamma * d_min.sqrt()).max(1.0);
    let domain = DecisionDomain::DapSpectral(class);
    let chi = domain.l1_diameter_bound();

    let tail = if class.gamma < 1.0 {
        1.0 / (1.0 - class.gamma)
    } else {
        sys.consts.h as f64
    };
    let g_cov = 2.0
        * (class.m * class.d_u * class.d_x) as f64
        * class.r
        * class.gamma
        * d_min.sqrt()
        * induced_one_norm(&sqrt_factor);
    let bias_bound = op_norm(&(&inv_sqrt_factor * sys.spec.b.transpose()))
        * op_norm(&sys.consts.p_inf)
        * (class.d_u as f64).sqrt()
        * tail;
    let g = g_cov + 2.0 * bias_bound;
    let l = 4.0 * g * g;
    let alpha_row = (class.m as f64 * op_norm(&sys.consts.sigma_inf)).sqrt();
    finish_config(g, l, p, d, chi, bias_bound, alpha_row, r_tilde, tau)
}

/// Closed-loop controller: drives the delayed regression learner with the
/// Kronecker covariates and plays the deflattened policy each round.
#[derive(Debug, Clone)]
pub struct DapRegressionController {
    pub sys: LqrSystem,
    pub class: DapClass,
    pub config: ProdrConfig,
    learner: DelayedProdr,
    domain: DecisionDomain,
    /// Disturbances w_1, w_2, ... (index t-1 holds w_t).
    disturbances: VecDeque<DVector<f64>>,
    /// Round index of the first retained disturbance.
    first_kept: usize,
    prev_x: Option<DVector<f64>>,
    prev_u: Option<DVector<f64>>,
    t: usize,
    /// Last round diagnostics for trace emission.
    pub last_diag: Option<RoundDiagnostics>,
}

impl DapRegressionController {
    /// Delay of the wrapped learner: the round-s target needs w_{s+h}, which
    /// is observable only after x_{s+h+1}, so the learner runs with h + 1
    /// round-robin instances.
    pub fn pipeline_delay(h: usize) -> usize {
        h + 1
    }

    pub fn new(sys: LqrSystem, class: DapClass, h_cap: Option<usize>, prune: PrunePolicy) -> Result<Self> {
        let mut sys = sys;
        if class.d_u != sys.spec.du() || class.d_x != sys.spec.dx() {
            return Err(Error::dims("DAP class does not match the plant"));
        }
        let default_cap = 10 * sys.spec.dx() + 50;
        let cap = h_cap.unwrap_or(default_cap).max(1);
        if sys.consts.h > cap {
            sys.consts.h = cap;
        }
        let tau = Self::pipeline_delay(sys.consts.h);
        let config = derive_lqr_config(&sys, class, tau)?;
        let domain = DecisionDomain::DapSpectral(class);
        let learner = DelayedProdr::new(config, domain.clone(), prune)?;
        Ok(Self {
            sys,
            class,
            config,
            learner,
            domain,
            disturbances: VecDeque::new(),
            first_kept: 1,
            prev_x: None,
            prev_u: None,
            t: 0,
            last_diag: None,
        })
    }

    /// Disturbance of round `round`, or zeros before the first round.
    fn w_at(&self, round: i64) -> DVector<f64> {
        if round < self.first_kept as i64 {
            return DVector::zeros(self.sys.spec.dx());
        }
        let idx = round as usize - self.first_kept;
        self.disturbances
            .get(idx)
            .cloned()
            .unwrap_or_else(|| DVector::zeros(self.sys.spec.dx()))
    }

    /// History (w_{t-1}, ..., w_{t-m}) for covariates at round `t`.
    fn history_for(&self, t: usize) -> Vec<DVector<f64>> {
        (1..=self.class.m)
            .map(|i| self.w_at(t as i64 - i as i64))
            .collect()
    }

    /// One closed-loop round: recover the latest disturbance, feed the
    /// now-complete delayed loss, obtain the regression play, and emit the
    /// control signal.
    pub fn control_step(&mut self, x_t: &DVector<f64>) -> Result<DVector<f64>> {
        self.t += 1;
        let t = self.t;
        if t >= 2 {
            let (px, pu) = (
                self.prev_x.as_ref().expect("state history"),
                self.prev_u.as_ref().expect("control history"),
            );
            let w_prev = recover_disturbance(px, pu, x_t, &self.sys, t - 1)?;
            self.disturbances.push_back(w_prev);
            // Retain only what covariates and delayed targets still need.
            let needed = self.class.m + self.learner.tau + self.sys.consts.h + 2;
            while self.disturbances.len() > needed {
                self.disturbances.pop_front();
                self.first_kept += 1;
            }
        }

        let tau = self.learner.tau;
        let delayed = if t > tau {
            let s = t - tau;
            let a_s = build_covariate(&self.history_for(s), &self.sys, self.class)?;
            let future: Vec<DVector<f64>> = (1..=self.sys.consts.h)
                .map(|j| self.w_at((s + j) as i64))
                .collect();
            let b_s = build_bias(&future, &self.sys);
            Some(CovariateBatch::new(a_s, b_s)?)
        } else {
            None
        };

        let a_now = build_covariate(&self.history_for(t), &self.sys, self.class)?;
        let (z_t, diag) = self.learner.step(&a_now, delayed.as_ref())?;
        self.last_diag = Some(diag);

        let params = deflatten(&z_t, self.class)?;
        debug_assert!(params.is_feasible(1e-6));
        let u_t = dap_control(&params, &self.sys.consts.k_inf, x_t, &self.history_for(t))?;
        self.prev_x = Some(x_t.clone());
        self.prev_u = Some(u_t.clone());
        Ok(u_t)
    }

    pub fn domain(&self) -> &DecisionDomain {
        &self.domain
    }

    pub fn learner(&self) -> &DelayedProdr {
        &self.learner
    }

    /// Played policy of the last round.
    pub fn last_policy(&self) -> Option<DapParams> {
        self.last_diag
            .as_ref()
            .map(|d| deflatten(&d.w_played, self.class).expect("played point has class shape"))
    }
}
