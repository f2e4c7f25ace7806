//! Hindsight comparator construction: fixed policies, supplied sequences,
//! and the binned sign-matching oracle used on the two-dimensional
//! sign-pattern environment.

use nalgebra::DMatrix;
use nalgebra::DVector;

use super::adversary::{recover_sign, DisturbanceAdversary};
use crate::dap::{DapClass, DapParams, DapSequence};
use crate::error::{Error, Result};

/// Produces a DAP sequence from the realized disturbances.
#[derive(Debug, Clone)]
pub enum ComparatorOracle {
    /// The same policy every round.
    FixedDap(DapParams),
    /// Bin the sign stream and play the bin-mean matcher within each bin.
    BinnedLowerBound { bin_width: usize },
    /// An externally supplied sequence.
    Supplied(DapSequence),
}

impl ComparatorOracle {
    pub fn build(&self, disturbances: &[DVector<f64>], class: DapClass) -> Result<DapSequence> {
        let n = disturbances.len();
        match self {
            ComparatorOracle::FixedDap(p) => {
                if p.class != class {
                    return Err(Error::dims("fixed comparator class mismatch"));
                }
                Ok(DapSequence::constant(p.clone(), n))
            }
            ComparatorOracle::Supplied(seq) => {
                if seq.len() != n {
                    return Err(Error::dims("supplied comparator length mismatch"));
                }
                Ok(seq.clone())
            }
            ComparatorOracle::BinnedLowerBound { bin_width } => {
                if class.m != 1 || class.d_u != 2 || class.d_x != 2 {
                    return Err(Error::dims(
                        "binned comparator is defined for m=1, d_u=d_x=2",
                    ));
                }
                let w = (*bin_width).clamp(1, n.max(1));
                let mut params = Vec::with_capacity(n);
                let mut start = 0usize;
                while start < n {
                    let end = (start + w).min(n);
                    let mean = disturbances[start..end]
                        .iter()
                        .map(recover_sign)
                        .sum::<f64>()
                        / (end - start) as f64;
                    let mut block = DMatrix::zeros(2, 2);
                    block[(0, 1)] = -mean;
                    let p = DapParams::new(class, vec![block])?;
                    for _ in start..end {
                        params.push(p.clone());
                    }
                    start = end;
                }
                let seq = DapSequence::new(class, params)?;
                debug_assert!(seq.params.iter().all(|p| p.is_feasible(1e-12)));
                Ok(seq)
            }
        }
    }
}

/// Bin width of the variation-budgeted sign matcher:
/// W = round(n^{2/3} (8 log n)^{1/3} / C_n^{2/3}), clamped to [1, n].
pub fn lower_bound_bin_width(n: usize, c_n: f64) -> Result<usize> {
    if c_n <= 0.0 {
        return Err(Error::InvalidBudget { budget: c_n });
    }
    let nf = n as f64;
    let w = nf.powf(2.0 / 3.0) * (8.0 * nf.ln()).powf(1.0 / 3.0) / c_n.powf(2.0 / 3.0);
    Ok((w.round() as i64).clamp(1, n as i64) as usize)
}

/// The sign adversary paired with its budgeted binned comparator.
pub fn lower_bound_adversary(
    n: usize,
    c_n: f64,
    seed: u64,
) -> Result<(DisturbanceAdversary, ComparatorOracle)> {
    let bin_width = lower_bound_bin_width(n, c_n)?;
    Ok((
        DisturbanceAdversary::LowerBound { seed },
        ComparatorOracle::BinnedLowerBound { bin_width },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dap::tv_of_sequence;
    use approx::assert_relative_eq;

    fn class() -> DapClass {
        DapClass::new(1, 1.0, 1.0, 2, 2).unwrap()
    }

    #[test]
    fn bin_width_formula_and_clamps() {
        let n = 1024usize;
        let w = lower_bound_bin_width(n, 1.0).unwrap();
        let expect = (1024.0f64.powf(2.0 / 3.0) * (8.0 * 1024.0f64.ln()).powf(1.0 / 3.0))
            .round() as usize;
        assert_eq!(w, expect);
        // Large budget clamps to per-round matching.
        assert_eq!(lower_bound_bin_width(n, n as f64).unwrap(), 1);
        assert!(lower_bound_bin_width(n, 0.0).is_err());
    }

    #[test]
    fn all_positive_bin_gives_unit_mean() {
        let ws: Vec<DVector<f64>> = (0..8)
            .map(|_| super::super::adversary::sign_disturbance(1.0))
            .collect();
        let seq = ComparatorOracle::BinnedLowerBound { bin_width: 4 }
            .build(&ws, class())
            .unwrap();
        for p in &seq.params {
            assert_relative_eq!(p.blocks[0][(0, 1)], -1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn per_round_matcher_when_width_one() {
        let ws = vec![
            super::super::adversary::sign_disturbance(1.0),
            super::super::adversary::sign_disturbance(-1.0),
            super::super::adversary::sign_disturbance(1.0),
        ];
        let seq = ComparatorOracle::BinnedLowerBound { bin_width: 1 }
            .build(&ws, class())
            .unwrap();
        assert_relative_eq!(seq.params[0].blocks[0][(0, 1)], -1.0, epsilon = 1e-15);
        assert_relative_eq!(seq.params[1].blocks[0][(0, 1)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(seq.params[2].blocks[0][(0, 1)], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn realized_tv_within_budget_with_high_probability() {
        // Post-hoc check of the budgeted construction at a desk scale.
        let n = 2048usize;
        let c_n = 4.0;
        let (adv, oracle) = lower_bound_adversary(n, c_n, 17).unwrap();
        let ws = adv.generate(n, 2).unwrap();
        let seq = oracle.build(&ws, class()).unwrap();
        let tv = tv_of_sequence(&seq);
        assert!(tv <= c_n, "realized TV {tv} above budget {c_n}");
    }
}
