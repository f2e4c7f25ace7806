//! Closed-loop simulation of the state evolution and counterfactual
//! comparator rollouts over a shared disturbance record.

use nalgebra::DVector;

use super::adversary::DisturbanceAdversary;
use crate::dap::{dap_control, DapSequence};
use crate::error::{Error, Result};
use crate::lqr::LqrSystem;
use crate::pipeline::DapRegressionController;

/// State-norm threshold that aborts a diverging run.
pub const OVERFLOW_NORM: f64 = 1e12;

/// Anything that maps states to controls round by round.
pub trait Controller {
    fn act(&mut self, t: usize, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// (barrier value, weight entropy) of the round, when meaningful.
    fn diagnostics(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// Plays u = -K_inf x, the zero disturbance-action policy.
pub struct ZeroDapController {
    k_inf: nalgebra::DMatrix<f64>,
}

impl ZeroDapController {
    pub fn new(sys: &LqrSystem) -> Self {
        Self {
            k_inf: sys.consts.k_inf.clone(),
        }
    }
}

impl Controller for ZeroDapController {
    fn act(&mut self, _t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-&self.k_inf * x)
    }
}

impl Controller for DapRegressionController {
    fn act(&mut self, _t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.control_step(x)
    }

    fn diagnostics(&self) -> (f64, f64) {
        self.last_diag
            .as_ref()
            .map(|d| (d.barrier, d.weight_entropy))
            .unwrap_or((0.0, 0.0))
    }
}

/// Everything a run produces: the trajectory, controls, per-round stage
/// losses, the disturbance record, and per-round learner diagnostics.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub losses: Vec<f64>,
    pub disturbances: Vec<DVector<f64>>,
    pub barrier: Vec<f64>,
    pub weight_entropy: Vec<f64>,
}

/// Run the loop x_{t+1} = A x_t + B u_t + w_t for n rounds from x_1.
/// Disturbances are drawn up front, so a (seeded) run is fully determined by
/// its inputs.
pub fn simulate(
    sys: &LqrSystem,
    adversary: &DisturbanceAdversary,
    controller: &mut dyn Controller,
    n: usize,
    x1: Option<DVector<f64>>,
) -> Result<SimResult> {
    let d_x = sys.spec.dx();
    let disturbances = adversary.generate(n, d_x)?;
    let mut x = x1.unwrap_or_else(|| DVector::zeros(d_x));
    let mut out = SimResult {
        states: Vec::with_capacity(n),
        controls: Vec::with_capacity(n),
        losses: Vec::with_capacity(n),
        disturbances,
        barrier: Vec::with_capacity(n),
        weight_entropy: Vec::with_capacity(n),
    };
    for t in 1..=n {
        if x.norm() > OVERFLOW_NORM {
            return Err(Error::NumericalOverflow {
                round: t,
                norm: x.norm(),
            });
        }
        let u = controller.act(t, &x)?;
        let (barrier, entropy) = controller.diagnostics();
        out.losses.push(sys.spec.stage_cost(&x, &u));
        out.states.push(x.clone());
        out.controls.push(u.clone());
        out.barrier.push(barrier);
        out.weight_entropy.push(entropy);
        x = &sys.spec.a * &x + &sys.spec.b * &u + &out.disturbances[t - 1];
    }
    Ok(out)
}

/// Counterfactual rollout: the state reached by playing the policy sequence
/// against the identical disturbances, never reading the learner's states.
pub fn rollout_comparator(
    sys: &LqrSystem,
    disturbances: &[DVector<f64>],
    comparator: &DapSequence,
) -> Result<Vec<f64>> {
    let n = disturbances.len();
    if comparator.len() != n {
        return Err(Error::dims("comparator length must match the horizon"));
    }
    let m = comparator.class.m;
    let d_x = sys.spec.dx();
    let mut x = DVector::zeros(d_x);
    let mut losses = Vec::with_capacity(n);
    for t in 1..=n {
        if x.norm() > OVERFLOW_NORM {
            return Err(Error::NumericalOverflow {
                round: t,
                norm: x.norm(),
            });
        }
        let history: Vec<DVector<f64>> = (1..=m)
            .map(|i| {
                if t as i64 - (i as i64) >= 1 {
                    disturbances[t - i - 1].clone()
                } else {
                    DVector::zeros(d_x)
                }
            })
            .collect();
        let u = dap_control(&comparator.params[t - 1], &sys.consts.k_inf, &x, &history)?;
        losses.push(sys.spec.stage_cost(&x, &u));
        x = &sys.spec.a * &x + &sys.spec.b * &u + &disturbances[t - 1];
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dap::{DapClass, DapParams};
    use crate::lqr::SystemSpec;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn lower_bound_system(n: usize) -> LqrSystem {
        LqrSystem::derive(
            SystemSpec::new(
                DMatrix::zeros(2, 2),
                -DMatrix::identity(2, 2),
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
                DMatrix::zeros(2, 2),
                n,
            )
            .unwrap(),
        )
        .unwrap()
    }

    struct NullController;
    impl Controller for NullController {
        fn act(&mut self, _t: usize, _x: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::zeros(2))
        }
    }

    #[test]
    fn zero_everything_stays_zero() {
        let sys = lower_bound_system(8);
        let adv = DisturbanceAdversary::PiecewiseConstant {
            segments: vec![(8, DVector::zeros(2))],
        };
        let mut c = ZeroDapController::new(&sys);
        let res = simulate(&sys, &adv, &mut c, 8, None).unwrap();
        assert!(res.losses.iter().all(|&l| l == 0.0));
        assert!(res.states.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn idle_controller_inherits_disturbance() {
        // With u = 0 the next state is the disturbance and the loss is the
        // squared first coordinate.
        let sys = lower_bound_system(16);
        let adv = DisturbanceAdversary::LowerBound { seed: 5 };
        let mut c = NullController;
        let res = simulate(&sys, &adv, &mut c, 16, None).unwrap();
        for t in 1..16 {
            assert!((res.states[t] - &res.disturbances[t - 1]).norm() <= 1e-15);
            assert_relative_eq!(
                res.losses[t],
                res.states[t][0] * res.states[t][0],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn determinism_same_seed() {
        let sys = lower_bound_system(32);
        let adv = DisturbanceAdversary::LowerBound { seed: 11 };
        let mut c1 = ZeroDapController::new(&sys);
        let mut c2 = ZeroDapController::new(&sys);
        let a = simulate(&sys, &adv, &mut c1, 32, None).unwrap();
        let b = simulate(&sys, &adv, &mut c2, 32, None).unwrap();
        assert_eq!(a.losses, b.losses);
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn comparator_identical_policy_zero_regret() {
        let sys = lower_bound_system(16);
        let class = DapClass::new(1, 1.0, 1.0, 2, 2).unwrap();
        let mut block = DMatrix::zeros(2, 2);
        block[(0, 1)] = -0.4;
        let p = DapParams::new(class, vec![block]).unwrap();
        let seq = crate::dap::DapSequence::constant(p.clone(), 16);

        // Learner that plays exactly the same policy.
        struct SeqController {
            sys: LqrSystem,
            seq: crate::dap::DapSequence,
            record: Vec<DVector<f64>>,
        }
        impl Controller for SeqController {
            fn act(&mut self, t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
                let history: Vec<DVector<f64>> = (1..=1)
                    .map(|i| {
                        if t as i64 - (i as i64) >= 1 {
                            self.record[t - i - 1].clone()
                        } else {
                            DVector::zeros(2)
                        }
                    })
                    .collect();
                dap_control(&self.seq.params[t - 1], &self.sys.consts.k_inf, x, &history)
            }
        }
        let adv = DisturbanceAdversary::LowerBound { seed: 21 };
        let ws = adv.generate(16, 2).unwrap();
        let mut ctl = SeqController {
            sys: sys.clone(),
            seq: seq.clone(),
            record: ws.clone(),
        };
        let res = simulate(&sys, &DisturbanceAdversary::Replay { values: ws.clone() }, &mut ctl, 16, None)
            .unwrap();
        let comp = rollout_comparator(&sys, &ws, &seq).unwrap();
        for (l, c) in res.losses.iter().zip(&comp) {
            assert_relative_eq!(*l, *c, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_comparator_loss_identity() {
        // Zero policy on the sign environment: loss_{t+1} = y_t^2 / 2 = 1/2.
        let sys = lower_bound_system(12);
        let class = DapClass::new(1, 1.0, 1.0, 2, 2).unwrap();
        let seq = crate::dap::DapSequence::constant(DapParams::zeros(class), 12);
        let adv = DisturbanceAdversary::LowerBound { seed: 2 };
        let ws = adv.generate(12, 2).unwrap();
        let losses = rollout_comparator(&sys, &ws, &seq).unwrap();
        assert_eq!(losses[0], 0.0);
        for l in &losses[1..] {
            assert_relative_eq!(*l, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn comparators_agree_before_divergence_round() {
        let sys = lower_bound_system(10);
        let class = DapClass::new(1, 1.0, 1.0, 2, 2).unwrap();
        let zero = DapParams::zeros(class);
        let mut block = DMatrix::zeros(2, 2);
        block[(0, 1)] = -0.8;
        let other = DapParams::new(class, vec![block]).unwrap();
        let mut params_a = vec![zero.clone(); 10];
        let mut params_b = vec![zero.clone(); 10];
        params_a[9] = other.clone();
        params_b[9] = zero.clone();
        let adv = DisturbanceAdversary::LowerBound { seed: 8 };
        let ws = adv.generate(10, 2).unwrap();
        let la = rollout_comparator(&sys, &ws, &crate::dap::DapSequence::new(class, params_a).unwrap()).unwrap();
        let lb = rollout_comparator(&sys, &ws, &crate::dap::DapSequence::new(class, params_b).unwrap()).unwrap();
        for t in 0..9 {
            assert_eq!(la[t], lb[t]);
        }
    }
}
