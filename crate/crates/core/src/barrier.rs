//! The min-max barrier S_t(w) = min_{x in D} max_i |a_i'(x - w)|, its
//! subgradient, the min-max projection played by the proper learner, and the
//! surrogate loss f_t + G * S_t.
//!
//! The barrier value is exact: by minimax exchange it equals
//! max_i min_x |a_i'(x - w)|, and each inner minimum is the distance of
//! a_i'w to the interval {a_i'x : x in D}, available in closed form from the
//! support function of D.

use nalgebra::{DMatrix, DVector};

use crate::dap::{clip_operator_norm, DapClass};
use crate::error::{Error, Result};
use crate::linalg::nuclear_norm;

/// Sign decisions within this margin are treated as exact zero, matching the
/// subgradient convention at kinks.
pub const SIGN_TOL: f64 = 1e-9;

/// Convex, compact, origin-symmetric decision sets supported by the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionDomain {
    /// Coordinate box of radius `r_tilde` in `dim` dimensions.
    Box { r_tilde: f64, dim: usize },
    /// Flattened DAP parameters with per-block spectral-norm bounds.
    DapSpectral(DapClass),
}

impl DecisionDomain {
    pub fn dim(&self) -> usize {
        match self {
            DecisionDomain::Box { dim, .. } => *dim,
            DecisionDomain::DapSpectral(c) => c.flat_dim(),
        }
    }

    /// Radius of the smallest enclosing coordinate box that the surrogate
    /// algorithm runs on.
    pub fn enclosing_box_radius(&self) -> f64 {
        match self {
            DecisionDomain::Box { r_tilde, .. } => *r_tilde,
            // The Frobenius cover gives R*gamma*sqrt(d_u ^ d_x); the leading
            // block alone forces at least R, so take the max to keep the set
            // inside the box.
            DecisionDomain::DapSpectral(c) => {
                let frob = c.r * c.gamma * (c.d_u.min(c.d_x) as f64).sqrt();
                frob.max(c.r)
            }
        }
    }

    /// Upper bound on the L1 norm over the set.
    pub fn l1_diameter_bound(&self) -> f64 {
        match self {
            DecisionDomain::Box { r_tilde, dim } => r_tilde * *dim as f64,
            DecisionDomain::DapSpectral(c) => {
                let per_block = ((c.d_u * c.d_x) as f64).sqrt() * (c.d_u.min(c.d_x) as f64).sqrt();
                (0..c.m).map(|i| c.block_bound(i) * per_block).sum()
            }
        }
    }

    /// Support function sup_{x in D} a'x. The set is symmetric, so the range
    /// of a'x over D is [-support, support].
    pub fn support(&self, a: &DVector<f64>) -> f64 {
        match self {
            DecisionDomain::Box { r_tilde, .. } => {
                r_tilde * a.iter().map(|v| v.abs()).sum::<f64>()
            }
            DecisionDomain::DapSpectral(c) => {
                let mut s = 0.0;
                for i in 0..c.m {
                    let block = self.block_of(a, i);
                    s += c.block_bound(i) * nuclear_norm(&block);
                }
                s
            }
        }
    }

    /// Euclidean projection onto the set.
    pub fn euclid_project(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            DecisionDomain::Box { r_tilde, .. } => {
                DVector::from_iterator(v.len(), v.iter().map(|&x| x.clamp(-r_tilde, *r_tilde)))
            }
            DecisionDomain::DapSpectral(c) => {
                let mut out = v.clone();
                for i in 0..c.m {
                    let clipped = clip_operator_norm(&self.block_of(v, i), c.block_bound(i));
                    let base = i * c.d_u * c.d_x;
                    let mut at = base;
                    for col in 0..c.d_x {
                        for row in 0..c.d_u {
                            out[at] = clipped[(row, col)];
                            at += 1;
                        }
                    }
                }
                out
            }
        }
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        match self {
            DecisionDomain::Box { r_tilde, .. } => v.iter().all(|&x| x.abs() <= r_tilde + tol),
            DecisionDomain::DapSpectral(c) => (0..c.m).all(|i| {
                crate::linalg::op_norm(&self.block_of(v, i)) <= c.block_bound(i) + tol
            }),
        }
    }

    /// Reshape block i of a flattened vector to d_u x d_x (column-major).
    fn block_of(&self, v: &DVector<f64>, i: usize) -> DMatrix<f64> {
        match self {
            DecisionDomain::DapSpectral(c) => {
                let base = i * c.d_u * c.d_x;
                DMatrix::from_fn(c.d_u, c.d_x, |r, col| v[base + col * c.d_u + r])
            }
            DecisionDomain::Box { .. } => unreachable!("blocks only exist for DapSpectral"),
        }
    }
}

/// One round of the regression protocol: covariate rows and targets.
#[derive(Debug, Clone)]
pub struct CovariateBatch {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl CovariateBatch {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::dims("covariate rows and targets disagree"));
        }
        Ok(Self { a, b })
    }

    /// Largest row L1 norm (the realized Assumption-1 alpha).
    pub fn alpha_row(&self) -> f64 {
        (0..self.a.nrows())
            .map(|i| self.a.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// L1 norm of the target vector (the realized Assumption-1 sigma).
    pub fn sigma_b(&self) -> f64 {
        self.b.iter().map(|v| v.abs()).sum()
    }

    /// Residual loss |A w - b|_2^2.
    pub fn loss(&self, w: &DVector<f64>) -> f64 {
        (&self.a * w - &self.b).norm_squared()
    }

    /// Gradient 2 A'(A w - b).
    pub fn loss_gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        2.0 * self.a.transpose() * (&self.a * w - &self.b)
    }
}

/// Iteration budget and optimality tolerance for the min-max projection.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

/// Exact barrier value via the max-of-mins form: each row contributes the
/// distance of a_i'w to the interval of reachable a_i'x.
pub fn eval_barrier(a: &DMatrix<f64>, w: &DVector<f64>, domain: &DecisionDomain) -> f64 {
    let mut best = 0.0f64;
    for i in 0..a.nrows() {
        let row = a.row(i).transpose();
        let support = domain.support(&row);
        let v = row.dot(w);
        best = best.max(v.abs() - support);
    }
    best.max(0.0)
}

/// Subgradient of the barrier: +/- the row attaining the outer max, or zero
/// when that row's inner minimum sits at an interior point.
pub fn barrier_subgradient(
    a: &DMatrix<f64>,
    w: &DVector<f64>,
    domain: &DecisionDomain,
) -> DVector<f64> {
    let mut best_val = f64::NEG_INFINITY;
    let mut best_row = 0;
    for i in 0..a.nrows() {
        let row = a.row(i).transpose();
        let v = row.dot(w).abs() - domain.support(&row);
        // Strict comparison keeps the smallest attaining index.
        if v > best_val {
            best_val = v;
            best_row = i;
        }
    }
    let row = a.row(best_row).transpose();
    if best_val <= SIGN_TOL {
        return DVector::zeros(w.len());
    }
    // a'(Pi(w) - w) = support - a'w when a'w > support (negative), and
    // -support - a'w when a'w < -support (positive).
    if row.dot(w) > 0.0 {
        row
    } else {
        -row
    }
}

/// Minimize max_i |a_i'(x - w)| over the domain by projected subgradient
/// steps with the exact optimum as a Polyak certificate. Returns a point
/// within `cfg.tol` of the barrier value.
pub fn minimax_project(
    a: &DMatrix<f64>,
    w: &DVector<f64>,
    domain: &DecisionDomain,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    let target = eval_barrier(a, w, domain);
    let objective = |x: &DVector<f64>| -> (f64, usize) {
        let mut best = 0.0f64;
        let mut idx = 0;
        for i in 0..a.nrows() {
            let v = (a.row(i).transpose().dot(x) - a.row(i).transpose().dot(w)).abs();
            if v > best {
                best = v;
                idx = i;
            }
        }
        (best, idx)
    };

    let mut x = domain.euclid_project(w);
    let (mut val, mut idx) = objective(&x);
    let mut best_x = x.clone();
    let mut best_val = val;
    for _ in 0..cfg.max_iter {
        if val <= target + cfg.tol {
            return Ok(x);
        }
        let row = a.row(idx).transpose();
        let inner = row.dot(&x) - row.dot(w);
        let g = if inner >= 0.0 { row } else { -row };
        let gn = g.norm_squared();
        if gn <= f64::MIN_POSITIVE {
            return Ok(x);
        }
        let step = (val - target) / gn;
        x = domain.euclid_project(&(&x - step * g));
        let (v, i) = objective(&x);
        val = v;
        idx = i;
        if val < best_val {
            best_val = val;
            best_x = x.clone();
        }
    }
    if best_val <= target + cfg.tol {
        Ok(best_x)
    } else {
        Err(Error::SolverNonConvergent {
            best: best_val,
            gap: best_val - target,
        })
    }
}

/// Value and subgradient of the surrogate loss f_t(w) + G * S_t(w).
pub fn surrogate_loss(
    batch: &CovariateBatch,
    w: &DVector<f64>,
    domain: &DecisionDomain,
    g_weight: f64,
) -> (f64, DVector<f64>) {
    let value = batch.loss(w) + g_weight * eval_barrier(&batch.a, w, domain);
    let grad = batch.loss_gradient(w) + g_weight * barrier_subgradient(&batch.a, w, domain);
    (value, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn interval() -> DecisionDomain {
        DecisionDomain::Box { r_tilde: 1.0, dim: 1 }
    }

    #[test]
    fn barrier_zero_inside() {
        let d = DecisionDomain::Box { r_tilde: 1.0, dim: 2 };
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.3, 0.8]);
        let w = DVector::from_vec(vec![0.4, -0.9]);
        assert_eq!(eval_barrier(&a, &w, &d), 0.0);
    }

    #[test]
    fn barrier_scalar_examples() {
        // d=1, D=[-1,1], a=2, w=3: min |2(x-3)| = 4.
        let a = DMatrix::from_element(1, 1, 2.0);
        let w = DVector::from_element(1, 3.0);
        assert_relative_eq!(eval_barrier(&a, &w, &interval()), 4.0, epsilon = 1e-15);

        // rows 1 and -3, w=2: x = 1 forced for row 2 -> max(1, 9) wait:
        // row1: |1*(x-2)| minimized at x=1 -> 1; row2: |-3(x-2)| -> 3.
        let a2 = DMatrix::from_column_slice(2, 1, &[1.0, -3.0]);
        let w2 = DVector::from_element(1, 2.0);
        assert_relative_eq!(eval_barrier(&a2, &w2, &interval()), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn subgradient_sign_rule() {
        let a = DMatrix::from_element(1, 1, 2.0);
        let w = DVector::from_element(1, 3.0);
        let g = barrier_subgradient(&a, &w, &interval());
        assert_eq!(g[0], 2.0);

        let wn = DVector::from_element(1, -3.0);
        let gn = barrier_subgradient(&a, &wn, &interval());
        assert_eq!(gn[0], -2.0);

        let inside = DVector::from_element(1, 0.2);
        assert_eq!(barrier_subgradient(&a, &inside, &interval())[0], 0.0);
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let d = DecisionDomain::Box { r_tilde: 1.0, dim: 2 };
        let mut checked = 0;
        while checked < 50 {
            let a = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
            // Skip kinks: require a clear margin between the top two rows
            // and a clearly signed inner value.
            let mut vals: Vec<f64> = (0..3)
                .map(|i| {
                    let r = a.row(i).transpose();
                    r.dot(&w).abs() - d.support(&r)
                })
                .collect();
            let top = vals
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
            if top <= 1e-3 || (vals[0] - vals[1]).abs() < 1e-3 {
                continue;
            }
            checked += 1;
            let g = barrier_subgradient(&a, &w, &d);
            let eps = 1e-6;
            for j in 0..2 {
                let mut wp = w.clone();
                wp[j] += eps;
                let mut wm = w.clone();
                wm[j] -= eps;
                let fd = (eval_barrier(&a, &wp, &d) - eval_barrier(&a, &wm, &d)) / (2.0 * eps);
                assert!((fd - g[j]).abs() <= 1e-4, "fd {fd} vs g {}", g[j]);
            }
        }
    }

    #[test]
    fn minimax_project_examples() {
        let cfg = SolverConfig::default();
        // Feasible w is returned unchanged.
        let d = DecisionDomain::Box { r_tilde: 1.0, dim: 2 };
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let w = DVector::from_vec(vec![0.3, -0.3]);
        let got = minimax_project(&a, &w, &d, &cfg).unwrap();
        assert_eq!(got, w);

        // d=1, a=2, w=3: boundary point 1.
        let a1 = DMatrix::from_element(1, 1, 2.0);
        let w1 = DVector::from_element(1, 3.0);
        let got1 = minimax_project(&a1, &w1, &interval(), &cfg).unwrap();
        assert_relative_eq!(got1[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn minimax_project_certificate_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = SolverConfig::default();
        for _ in 0..50 {
            let dim = rng.gen_range(1..4usize);
            let p = rng.gen_range(1..4usize);
            let d = DecisionDomain::Box { r_tilde: 1.0, dim };
            let a = DMatrix::from_fn(p, dim, |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
            let x = minimax_project(&a, &w, &d, &cfg).unwrap();
            assert!(d.contains(&x, 1e-12));
            let obj = (0..p)
                .map(|i| (a.row(i).transpose().dot(&x) - a.row(i).transpose().dot(&w)).abs())
                .fold(0.0f64, f64::max);
            assert!(obj <= eval_barrier(&a, &w, &d) + cfg.tol + 1e-12);
        }
    }

    #[test]
    fn surrogate_equals_f_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = DecisionDomain::Box { r_tilde: 1.0, dim: 3 };
        for _ in 0..50 {
            let a = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let batch = CovariateBatch::new(a, b).unwrap();
            let u = DVector::from_fn(3, |_, _| rng.gen_range(-0.99..0.99));
            let (val, _) = surrogate_loss(&batch, &u, &d, 5.0);
            assert_eq!(val, batch.loss(&u));
        }
    }

    #[test]
    fn surrogate_zero_covariate() {
        let d = DecisionDomain::Box { r_tilde: 1.0, dim: 2 };
        let batch = CovariateBatch::new(
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![0.5, -0.25]),
        )
        .unwrap();
        let w = DVector::from_vec(vec![7.0, -3.0]);
        let (val, grad) = surrogate_loss(&batch, &w, &d, 3.0);
        assert_relative_eq!(val, 0.3125, epsilon = 1e-15);
        assert!(grad.norm() == 0.0);
    }

    #[test]
    fn surrogate_dominates_f_outside() {
        let d = DecisionDomain::Box { r_tilde: 1.0, dim: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let batch = CovariateBatch::new(a, b).unwrap();
            let w = DVector::from_fn(2, |_, _| rng.gen_range(-4.0..4.0));
            let (val, _) = surrogate_loss(&batch, &w, &d, 2.0);
            assert!(val >= batch.loss(&w));
        }
    }

    #[test]
    fn barrier_convex_by_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = DecisionDomain::Box { r_tilde: 0.8, dim: 3 };
        for _ in 0..100 {
            let a = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
            let w1 = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
            let w2 = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
            let lam: f64 = rng.gen_range(0.0..1.0);
            let mid = lam * &w1 + (1.0 - lam) * &w2;
            let lhs = eval_barrier(&a, &mid, &d);
            let rhs = lam * eval_barrier(&a, &w1, &d) + (1.0 - lam) * eval_barrier(&a, &w2, &d);
            assert!(lhs <= rhs + 1e-10);
        }
    }

    #[test]
    fn max_of_mins_equals_grid_min_of_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let d = DecisionDomain::Box { r_tilde: 1.0, dim: 2 };
        for _ in 0..10 {
            let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(2, |_, _| rng.gen_range(-2.5..2.5));
            let exact = eval_barrier(&a, &w, &d);
            // Coarse grid min over D of the max.
            let steps = 400;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=steps {
                    let x = DVector::from_vec(vec![
                        -1.0 + 2.0 * i as f64 / steps as f64,
                        -1.0 + 2.0 * j as f64 / steps as f64,
                    ]);
                    let v = (0..2)
                        .map(|r| (a.row(r).transpose().dot(&(&x - &w))).abs())
                        .fold(0.0f64, f64::max);
                    best = best.min(v);
                }
            }
            assert!(best >= exact - 1e-12);
            assert!(best <= exact + 0.02);
        }
    }

    #[test]
    fn dap_spectral_support_and_projection() {
        let c = DapClass::new(2, 1.0, 0.5, 2, 2).unwrap();
        let d = DecisionDomain::DapSpectral(c);
        // Membership and projection agree.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let v = DVector::from_fn(d.dim(), |_, _| rng.gen_range(-2.0..2.0));
            let p = d.euclid_project(&v);
            assert!(d.contains(&p, 1e-9));
            // Support bounds the inner product over the set.
            let a = DVector::from_fn(d.dim(), |_, _| rng.gen_range(-1.0..1.0));
            assert!(a.dot(&p) <= d.support(&a) + 1e-9);
        }
    }
}
