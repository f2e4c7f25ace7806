//! Regret accounting: per-round differences, prefix sums, and windowed
//! static-regret tables over a dyadic window grid.

use crate::error::{Error, Result};
use crate::linalg::{kahan_sum, ls_slope};

/// Per-round losses of learner and comparator with derived regret columns.
#[derive(Debug, Clone)]
pub struct RegretTrace {
    pub learner: Vec<f64>,
    pub comparator: Vec<f64>,
    pub per_round: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Total variation of the comparator parameter sequence, when known.
    pub comparator_tv: f64,
    /// (start, end, static regret) over the dyadic window grid, 1-based
    /// inclusive bounds. Populated by the windowed builders.
    pub windowed: Vec<(usize, usize, f64)>,
}

/// Per-round difference and prefix sums.
pub fn compute_regret(learner: &[f64], comparator: &[f64], comparator_tv: f64) -> Result<RegretTrace> {
    if learner.len() != comparator.len() {
        return Err(Error::dims("loss sequences must have equal length"));
    }
    let per_round: Vec<f64> = learner
        .iter()
        .zip(comparator)
        .map(|(l, c)| l - c)
        .collect();
    let mut cumulative = Vec::with_capacity(per_round.len());
    let mut acc = 0.0;
    for d in &per_round {
        acc += d;
        cumulative.push(acc);
    }
    Ok(RegretTrace {
        learner: learner.to_vec(),
        comparator: comparator.to_vec(),
        per_round,
        cumulative,
        comparator_tv,
        windowed: Vec::new(),
    })
}

impl RegretTrace {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Aligned dyadic windows [k 2^j + 1, (k+1) 2^j] with length at least
/// `min_len`, 1-based inclusive.
pub fn dyadic_windows(n: usize, min_len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut len = min_len.max(1).next_power_of_two();
    while len <= n {
        let mut start = 1;
        while start + len - 1 <= n {
            out.push((start, start + len - 1));
            start += len;
        }
        len *= 2;
    }
    out
}

/// Static regret per window against the best of the candidate loss
/// sequences: sum of learner losses minus the minimum candidate sum.
pub fn windowed_table_from_candidates(
    learner: &[f64],
    candidates: &[Vec<f64>],
    windows: &[(usize, usize)],
) -> Result<Vec<(usize, usize, f64)>> {
    let n = learner.len();
    if candidates.iter().any(|c| c.len() != n) {
        return Err(Error::dims("candidate loss sequences must match the horizon"));
    }
    // Prefix sums (index i holds the sum of the first i rounds).
    let prefix = |xs: &[f64]| -> Vec<f64> {
        let mut p = Vec::with_capacity(n + 1);
        p.push(0.0);
        let mut acc = 0.0;
        for x in xs {
            acc += x;
            p.push(acc);
        }
        p
    };
    let lp = prefix(learner);
    let cps: Vec<Vec<f64>> = candidates.iter().map(|c| prefix(c)).collect();
    let mut table = Vec::with_capacity(windows.len());
    for &(a, b) in windows {
        if a == 0 || b > n || a > b {
            return Err(Error::dims(format!("bad window ({a}, {b})")));
        }
        let learner_sum = lp[b] - lp[a - 1];
        let best = cps
            .iter()
            .map(|p| p[b] - p[a - 1])
            .fold(f64::INFINITY, f64::min);
        table.push((a, b, learner_sum - best));
    }
    Ok(table)
}

/// Log-log least-squares slope of y against x; both must be positive.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::bounds("slope needs at least two points"));
    }
    if x.iter().chain(y.iter()).any(|&v| v <= 0.0) {
        return Err(Error::bounds("log-log slope needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(ls_slope(&lx, &ly))
}

/// Median of a nonempty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Kahan totals used by tests that compare energy identities.
pub fn total_loss(xs: &[f64]) -> f64 {
    kahan_sum(xs.iter().cloned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_sequences_zero() {
        let l = vec![1.0, 2.0, 3.0];
        let t = compute_regret(&l, &l, 0.0).unwrap();
        assert!(t.per_round.iter().all(|&d| d == 0.0));
        assert_eq!(t.total(), 0.0);
    }

    #[test]
    fn constant_gap_accumulates_linearly() {
        let l = vec![2.0; 10];
        let c = vec![1.5; 10];
        let t = compute_regret(&l, &c, 0.0).unwrap();
        assert_relative_eq!(t.total(), 5.0, epsilon = 1e-12);
        assert_relative_eq!(t.cumulative[4], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn hand_built_prefix_sums() {
        let l = vec![1.0, 0.0, 2.0, 5.0, 1.0];
        let c = vec![0.5, 1.0, 1.0, 1.0, 0.0];
        let t = compute_regret(&l, &c, 0.0).unwrap();
        let expect = [0.5, -0.5, 0.5, 4.5, 5.5];
        for (got, want) in t.cumulative.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn dyadic_grid_shape() {
        let w = dyadic_windows(16, 4);
        assert!(w.contains(&(1, 4)));
        assert!(w.contains(&(13, 16)));
        assert!(w.contains(&(1, 16)));
        assert!(w.contains(&(9, 16)));
        assert!(!w.iter().any(|&(a, b)| b - a + 1 < 4));
    }

    #[test]
    fn windowed_table_picks_best_candidate() {
        let learner = vec![1.0; 8];
        let cand1 = vec![0.9; 8];
        let mut cand2 = vec![2.0; 8];
        for v in cand2.iter_mut().take(4) {
            *v = 0.0;
        }
        let windows = vec![(1, 4), (5, 8), (1, 8)];
        let table =
            windowed_table_from_candidates(&learner, &[cand1, cand2], &windows).unwrap();
        assert_relative_eq!(table[0].2, 4.0, epsilon = 1e-12); // cand2 wins
        assert_relative_eq!(table[1].2, 0.4, epsilon = 1e-12); // cand1 wins
        assert_relative_eq!(table[2].2, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn slope_of_powers() {
        let x = vec![256.0, 512.0, 1024.0, 2048.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.0 / 3.0)).collect();
        assert_relative_eq!(log_log_slope(&x, &y).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        let lin: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
        assert_relative_eq!(log_log_slope(&x, &lin).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn median_both_parities() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
