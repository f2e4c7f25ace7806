//! Follow-the-Leading-History: one base learner started at every round,
//! exponentially weighted aggregation over their predictions, and the
//! addition step that seeds each newcomer with weight 1/(t+1).

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::kahan_sum;
use crate::ons::{ExpConcaveSurrogate, OnsState};

/// Learner-retention policy. The default keeps the full history; the
/// geometric option is an opt-in engineering deviation that retains a
/// learner started at s only while t - s stays within a window proportional
/// to the largest power of two dividing s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrunePolicy {
    #[default]
    KeepAll,
    Geometric,
}

impl PrunePolicy {
    fn alive(&self, start: usize, now: usize) -> bool {
        match self {
            PrunePolicy::KeepAll => true,
            PrunePolicy::Geometric => {
                let lowbit = 1usize << start.trailing_zeros().min(62);
                now < start + 4 * lowbit + 2
            }
        }
    }
}

/// Fan out to rayon only past this many base learners.
const PARALLEL_THRESHOLD: usize = 128;

/// Meta-learner state: active base learners with their linear weights.
/// Weight arithmetic exponentiates only min-shifted quantities, so the
/// multiplicative step is stable for losses of any common magnitude.
#[derive(Debug, Clone)]
pub struct FlhState {
    pub eta: f64,
    pub zeta: f64,
    pub box_radius: f64,
    pub dim: usize,
    pub t: usize,
    pub prune: PrunePolicy,
    learners: Vec<OnsState>,
    weights: Vec<f64>,
}

impl FlhState {
    /// Round-1 state: a single learner with weight one.
    pub fn init(dim: usize, zeta: f64, eta: f64, box_radius: f64, prune: PrunePolicy) -> Result<Self> {
        let first = OnsState::init(dim, zeta, box_radius, 1)?;
        Ok(Self {
            eta,
            zeta,
            box_radius,
            dim,
            t: 1,
            prune,
            learners: vec![first],
            weights: vec![1.0],
        })
    }

    pub fn active_learners(&self) -> usize {
        self.learners.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn start_times(&self) -> Vec<usize> {
        self.learners.iter().map(|l| l.start_time).collect()
    }

    /// Base predictions for the current round.
    pub fn base_predictions(&self) -> Vec<DVector<f64>> {
        self.learners.iter().map(|l| l.w.clone()).collect()
    }

    /// Weighted aggregate of the supplied base predictions.
    pub fn aggregate(&self, preds: &[DVector<f64>]) -> DVector<f64> {
        assert_eq!(preds.len(), self.weights.len());
        let mut out = DVector::zeros(self.dim);
        for (v, p) in self.weights.iter().zip(preds) {
            out += *v * p;
        }
        out
    }

    /// Convenience: predictions plus their aggregate.
    pub fn predict(&self) -> (Vec<DVector<f64>>, DVector<f64>) {
        let preds = self.base_predictions();
        let agg = self.aggregate(&preds);
        (preds, agg)
    }

    /// Shannon entropy of the weight vector, for diagnostics.
    pub fn weight_entropy(&self) -> f64 {
        -kahan_sum(
            self.weights
                .iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| v * v.ln()),
        )
    }

    /// Full round update: exponential reweighting by the per-learner losses,
    /// ONS update of every base learner with its per-learner gradient, then
    /// the addition step that spawns the round-(t+1) learner.
    pub fn update(
        &mut self,
        losses: &[f64],
        gradients: &[DVector<f64>],
    ) -> Result<()> {
        assert_eq!(losses.len(), self.learners.len());
        assert_eq!(gradients.len(), self.learners.len());

        // Multiplicative step on min-shifted losses: subtracting the minimum
        // loss leaves the normalized weights unchanged and keeps every
        // exponent in [-eta * range, 0].
        let min_loss = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut raw: Vec<f64> = self
            .weights
            .iter()
            .zip(losses)
            .map(|(&v, &f)| {
                if v > 0.0 {
                    v.ln() - self.eta * (f - min_loss)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max_raw = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for r in raw.iter_mut() {
            *r = (*r - max_raw).exp();
        }
        let z = kahan_sum(raw.iter().cloned());
        for (w, r) in self.weights.iter_mut().zip(&raw) {
            *w = r / z;
        }

        // Base-learner updates.
        if self.learners.len() >= PARALLEL_THRESHOLD {
            self.learners
                .par_iter_mut()
                .zip(gradients.par_iter())
                .try_for_each(|(l, g)| l.update(g))?;
        } else {
            for (l, g) in self.learners.iter_mut().zip(gradients) {
                l.update(g)?;
            }
        }

        // Addition step: newcomer gets exactly 1/(t+1), the rest scale by
        // 1 - 1/(t+1).
        let t1 = (self.t + 1) as f64;
        let scale = 1.0 - 1.0 / t1;
        for w in self.weights.iter_mut() {
            *w *= scale;
        }
        self.learners
            .push(OnsState::init(self.dim, self.zeta, self.box_radius, self.t + 1)?);
        self.weights.push(1.0 / t1);
        self.t += 1;

        // Optional retention cap.
        if self.prune == PrunePolicy::Geometric {
            let now = self.t;
            let keep: Vec<bool> = self
                .learners
                .iter()
                .map(|l| self.prune.alive(l.start_time, now) || l.start_time == now)
                .collect();
            if keep.iter().any(|k| !k) {
                let mut learners = Vec::with_capacity(self.learners.len());
                let mut weights = Vec::with_capacity(self.weights.len());
                for (i, l) in self.learners.drain(..).enumerate() {
                    if keep[i] {
                        learners.push(l);
                        weights.push(self.weights[i]);
                    }
                }
                let z = kahan_sum(weights.iter().cloned());
                for w in weights.iter_mut() {
                    *w /= z;
                }
                self.learners = learners;
                self.weights = weights;
            }
        }
        Ok(())
    }

    /// Evaluate a surrogate loss at each base prediction and run the full
    /// update with its per-learner gradients.
    pub fn update_with_surrogate(
        &mut self,
        surrogate: &ExpConcaveSurrogate,
        preds: &[DVector<f64>],
    ) -> Result<()> {
        let losses: Vec<f64> = preds.iter().map(|p| surrogate.value(p)).collect();
        let grads: Vec<DVector<f64>> = preds.iter().map(|p| surrogate.gradient(p)).collect();
        self.update(&losses, &grads)
    }
}
