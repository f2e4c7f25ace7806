//! Proper nonstationary minibatch linear regression: the surrogate FLH-ONS
//! algorithm runs on an enclosing coordinate box, each round's play is the
//! min-max projection of its prediction into the true decision set, and the
//! feedback it receives is the barrier-augmented surrogate loss. A
//! round-robin wrapper turns the learner into its delayed-feedback variant.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::barrier::{
    barrier_subgradient, eval_barrier, minimax_project, CovariateBatch, DecisionDomain,
    SolverConfig,
};
use crate::error::{Error, Result};
use crate::flh::{FlhState, PrunePolicy};
use crate::ons::ExpConcaveSurrogate;

/// All scalars the learner needs, either derived from the assumption-level
/// bounds or supplied explicitly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProdrConfig {
    /// Barrier weight; must dominate sup |A_t (w1 + w2) - 2 b_t|_1.
    pub g: f64,
    /// Exp-concavity scale; the surrogate parameter is 1/(4 L).
    pub l: f64,
    pub alpha_row: f64,
    pub sigma_b: f64,
    pub chi: f64,
    pub r_tilde: f64,
    /// Gradient-scale parameter of the box algorithm.
    pub gamma_param: f64,
    /// ONS preconditioner floor.
    pub zeta: f64,
    /// FLH learning rate.
    pub eta: f64,
    pub d: usize,
    pub p: usize,
    /// Feedback delay (1 = no delay).
    pub tau: usize,
}

impl ProdrConfig {
    /// Exp-concavity parameter of the surrogate losses.
    pub fn alpha_exp(&self) -> f64 {
        1.0 / (4.0 * self.l)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("G", self.g),
            ("L", self.l),
            ("alpha_row", self.alpha_row),
            ("chi", self.chi),
            ("R_tilde", self.r_tilde),
            ("gamma", self.gamma_param),
            ("zeta", self.zeta),
            ("eta", self.eta),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::bounds(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sigma_b < 0.0 {
            return Err(Error::bounds("sigma_b must be nonnegative"));
        }
        if self.d == 0 || self.p == 0 || self.tau == 0 {
            return Err(Error::bounds("d, p and tau must be positive"));
        }
        Ok(())
    }
}

/// Derive every parameter from the assumption-level bounds:
/// G = 2 p chi + 2 sigma, L = 6 (p chi + sigma)^2,
/// gamma = 2 G alpha R~ sqrt(d / 8L) + sqrt(2 L),
/// zeta = min(1/(16 G alpha R~ sqrt(d)), 1/(4 gamma^2)), eta = 1/(2 gamma^2).
pub fn derive_config(
    p: usize,
    d: usize,
    chi: f64,
    sigma_b: f64,
    alpha_row: f64,
    r_tilde: f64,
    tau: usize,
) -> Result<ProdrConfig> {
    if chi <= 0.0 || alpha_row <= 0.0 || r_tilde <= 0.0 || sigma_b < 0.0 {
        return Err(Error::bounds("assumption bounds must be positive"));
    }
    let g = 2.0 * p as f64 * chi + 2.0 * sigma_b;
    let l = 6.0 * (p as f64 * chi + sigma_b).powi(2);
    finish_config(g, l, p, d, chi, sigma_b, alpha_row, r_tilde, tau)
}

/// Complete a config from explicit G and L.
#[allow(clippy::too_many_arguments)]
pub fn finish_config(
    g: f64,
    l: f64,
    p: usize,
    d: usize,
    chi: f64,
    sigma_b: f64,
    alpha_row: f64,
    r_tilde: f64,
    tau: usize,
) -> Result<ProdrConfig> {
    let gamma_param = 2.0 * g * alpha_row * r_tilde * (d as f64 / (8.0 * l)).sqrt()
        + (2.0 * l).sqrt();
    let zeta = (1.0 / (16.0 * g * alpha_row * r_tilde * (d as f64).sqrt()))
        .min(1.0 / (4.0 * gamma_param * gamma_param));
    let eta = 1.0 / (2.0 * gamma_param * gamma_param);
    let cfg = ProdrConfig {
        g,
        l,
        alpha_row,
        sigma_b,
        chi,
        r_tilde,
        gamma_param,
        zeta,
        eta,
        d,
        p,
        tau,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Per-round intermediate quantities, kept for regret debugging and tests.
#[derive(Debug, Clone)]
pub struct RoundDiagnostics {
    pub round: usize,
    /// Surrogate-algorithm prediction before projection.
    pub w_pred: DVector<f64>,
    /// Played point inside the decision set.
    pub w_played: DVector<f64>,
    /// Barrier value at the prediction.
    pub barrier: f64,
    /// Surrogate loss at the prediction (filled on update).
    pub ell_value: f64,
    pub active_learners: usize,
    pub weight_entropy: f64,
}

/// One ProDR instance: the box-dwelling FLH-ONS learner plus the projection
/// and surrogate-loss plumbing around it.
#[derive(Debug, Clone)]
pub struct ProdrState {
    pub config: ProdrConfig,
    pub domain: DecisionDomain,
    pub solver: SolverConfig,
    flh: FlhState,
    round: usize,
    /// Prediction state cached from the last `predict`, consumed by `update`.
    pending: Option<Pending>,
    /// Rounds whose losses have been consumed, for delay audits.
    consumed_rounds: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Pending {
    base_preds: Vec<DVector<f64>>,
    w_pred: DVector<f64>,
}

impl ProdrState {
    pub fn new(config: ProdrConfig, domain: DecisionDomain, prune: PrunePolicy) -> Result<Self> {
        config.validate()?;
        if domain.dim() != config.d {
            return Err(Error::dims("domain dimension disagrees with config"));
        }
        let flh = FlhState::init(config.d, config.zeta, config.eta, config.r_tilde, prune)?;
        Ok(Self {
            config,
            domain,
            solver: SolverConfig::default(),
            flh,
            round: 0,
            pending: None,
            consumed_rounds: Vec::new(),
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn consumed_rounds(&self) -> &[usize] {
        &self.consumed_rounds
    }

    /// Steps 1-3 of the round: surrogate prediction and min-max projection.
    /// The prediction state is cached until the matching `update`.
    pub fn predict(&mut self, batch_a: &nalgebra::DMatrix<f64>) -> Result<(DVector<f64>, RoundDiagnostics)> {
        let (base_preds, w_pred) = self.flh.predict();
        let played = minimax_project(batch_a, &w_pred, &self.domain, &self.solver)?;
        self.round += 1;
        let diag = RoundDiagnostics {
            round: self.round,
            w_pred: w_pred.clone(),
            w_played: played.clone(),
            barrier: eval_barrier(batch_a, &w_pred, &self.domain),
            ell_value: f64::NAN,
            active_learners: self.flh.active_learners(),
            weight_entropy: self.flh.weight_entropy(),
        };
        self.pending = Some(Pending { base_preds, w_pred });
        Ok((played, diag))
    }

    /// Steps 4-5: build the surrogate loss for the cached prediction and
    /// feed its exp-concave quadratic to the box algorithm. `loss_round`
    /// tags which round's covariates are being consumed (delay audit).
    pub fn update(&mut self, batch: &CovariateBatch, loss_round: usize) -> Result<f64> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::bounds("update without a pending prediction"))?;
        let w = pending.w_pred;
        let f_val = batch.loss(&w);
        let s_val = eval_barrier(&batch.a, &w, &self.domain);
        let ell_value = f_val + self.config.g * s_val;
        let grad = batch.loss_gradient(&w)
            + self.config.g * barrier_subgradient(&batch.a, &w, &self.domain);
        let surrogate = ExpConcaveSurrogate::new(grad, w, self.config.alpha_exp())?;
        self.flh.update_with_surrogate(&surrogate, &pending.base_preds)?;
        self.consumed_rounds.push(loss_round);
        Ok(ell_value)
    }

    /// Non-delayed protocol: predict, play, and immediately consume the
    /// same round's loss.
    pub fn round_trip(&mut self, batch: &CovariateBatch) -> Result<(DVector<f64>, RoundDiagnostics)> {
        let (played, mut diag) = self.predict(&batch.a)?;
        let round = self.round;
        diag.ell_value = self.update(batch, round)?;
        Ok((played, diag))
    }
}

/// Round-robin reduction from delayed to non-delayed feedback: tau
/// independent instances, instance (t-1) mod tau first consumes the loss of
/// round t - tau, then predicts for round t.
#[derive(Debug, Clone)]
pub struct DelayedProdr {
    pub tau: usize,
    instances: Vec<ProdrState>,
    t: usize,
}

impl DelayedProdr {
    pub fn new(config: ProdrConfig, domain: DecisionDomain, prune: PrunePolicy) -> Result<Self> {
        let tau = config.tau;
        let instances = (0..tau)
            .map(|_| ProdrState::new(config, domain.clone(), prune))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tau, instances, t: 0 })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn instances(&self) -> &[ProdrState] {
        &self.instances
    }

    /// Advance one round: consume the round-(t - tau) loss if supplied, then
    /// predict for round t with the current covariate. Exactly one instance
    /// is touched.
    pub fn step(
        &mut self,
        a_now: &nalgebra::DMatrix<f64>,
        delayed: Option<&CovariateBatch>,
    ) -> Result<(DVector<f64>, RoundDiagnostics)> {
        self.t += 1;
        let idx = (self.t - 1) % self.tau;
        if self.t > self.tau {
            let batch = delayed.ok_or_else(|| {
                Error::bounds(format!("round {}: delayed loss for round {} missing", self.t, self.t - self.tau))
            })?;
            let inst = &mut self.instances[idx];
            inst.update(batch, self.t - self.tau)?;
        } else if delayed.is_some() {
            return Err(Error::bounds("no loss is due before round tau + 1"));
        }
        self.instances[idx].predict(a_now)
    }
}
