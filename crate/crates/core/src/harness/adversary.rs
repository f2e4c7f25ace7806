//! Disturbance generators. Every generator honors the unit-norm contract
//! |w_t|_2 <= 1; the sign-based generators scale the two-dimensional
//! [y_t, 1] pattern by 1/sqrt(2).

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How disturbances are produced for a run.
#[derive(Debug, Clone)]
pub enum DisturbanceAdversary {
    /// Random signs on the first coordinate: w_t = [y_t, 1] / sqrt(2) with
    /// y_t = +/-1 equiprobable. Requires d_x = 2.
    LowerBound { seed: u64 },
    /// Fixed vectors held over segments of given lengths.
    PiecewiseConstant { segments: Vec<(usize, DVector<f64>)> },
    /// Signs with a slowly drifting bias: P(y_t = 1) = (1 + b_t)/2 with
    /// b_t = amplitude * sin(2 pi t / period). Requires d_x = 2.
    SinusoidalDrift { amplitude: f64, period: f64, seed: u64 },
    /// Replay a recorded stream.
    Replay { values: Vec<DVector<f64>> },
}

impl DisturbanceAdversary {
    /// Emit w_1, ..., w_n.
    pub fn generate(&self, n: usize, d_x: usize) -> Result<Vec<DVector<f64>>> {
        let ws = match self {
            DisturbanceAdversary::LowerBound { seed } => {
                require_two_dim(d_x)?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n)
                    .map(|_| sign_disturbance(if rng.gen::<bool>() { 1.0 } else { -1.0 }))
                    .collect()
            }
            DisturbanceAdversary::PiecewiseConstant { segments } => {
                let mut out = Vec::with_capacity(n);
                'outer: for (len, w) in segments {
                    for _ in 0..*len {
                        if out.len() == n {
                            break 'outer;
                        }
                        out.push(w.clone());
                    }
                }
                while out.len() < n {
                    out.push(
                        segments
                            .last()
                            .map(|(_, w)| w.clone())
                            .unwrap_or_else(|| DVector::zeros(d_x)),
                    );
                }
                out
            }
            DisturbanceAdversary::SinusoidalDrift { amplitude, period, seed } => {
                require_two_dim(d_x)?;
                if !(0.0..=1.0).contains(amplitude) || *period <= 0.0 {
                    return Err(Error::bounds("drift needs amplitude in [0,1] and period > 0"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (1..=n)
                    .map(|t| {
                        let bias = amplitude
                            * (2.0 * std::f64::consts::PI * t as f64 / period).sin();
                        let p_plus = 0.5 * (1.0 + bias);
                        let y = if rng.gen::<f64>() < p_plus { 1.0 } else { -1.0 };
                        sign_disturbance(y)
                    })
                    .collect()
            }
            DisturbanceAdversary::Replay { values } => {
                if values.len() < n {
                    return Err(Error::bounds(format!(
                        "replay stream has {} rounds, need {n}",
                        values.len()
                    )));
                }
                values.iter().take(n).cloned().collect()
            }
        };
        for (t, w) in ws.iter().enumerate() {
            if w.len() != d_x {
                return Err(Error::dims(format!("disturbance {t} has wrong dimension")));
            }
            let norm = w.norm();
            if norm > 1.0 + 1e-9 {
                return Err(Error::DisturbanceBoundViolated { round: t + 1, norm });
            }
        }
        Ok(ws)
    }
}

fn require_two_dim(d_x: usize) -> Result<()> {
    if d_x != 2 {
        return Err(Error::dims("sign adversaries are defined for d_x = 2"));
    }
    Ok(())
}

/// The [y, 1]/sqrt(2) pattern.
pub fn sign_disturbance(y: f64) -> DVector<f64> {
    DVector::from_vec(vec![y, 1.0]) / 2.0f64.sqrt()
}

/// Recover y_t = +/-1 from a sign-pattern disturbance.
pub fn recover_sign(w: &DVector<f64>) -> f64 {
    (w[0] * 2.0f64.sqrt()).clamp(-1.0, 1.0)
}
