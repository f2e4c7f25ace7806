//! System-level constants for LQR with known dynamics: the discrete Riccati
//! fixed point, the optimal feedback gain, spectral data of the steady-state
//! cost matrix, the feedback-delay horizon and the truncated feedforward
//! target chased by the regression learner.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    min_effective_eigenvalue, op_norm, pinv_solve_checked, spectral_radius, symmetric_eigen_sorted,
};

/// Default operator-norm tolerance for the Riccati residual.
pub const TOL_DARE: f64 = 1e-10;
/// Default iteration budget for the Riccati fixed point.
pub const MAX_DARE_ITER: usize = 100_000;
/// Eigenvalues below this threshold are treated as exactly zero.
pub const RANK_TOL: f64 = 1e-9;
/// Reconstruction tolerance for the spectral factorization.
pub const TOL_EIG: f64 = 1e-9;

/// Plant description: dynamics (A, B), quadratic costs (R_x, R_u) and horizon.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub r_x: DMatrix<f64>,
    pub r_u: DMatrix<f64>,
    pub horizon: usize,
}

impl SystemSpec {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        r_x: DMatrix<f64>,
        r_u: DMatrix<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let dx = a.nrows();
        if a.ncols() != dx {
            return Err(Error::dims("A must be square"));
        }
        if b.nrows() != dx {
            return Err(Error::dims("B must have as many rows as A"));
        }
        let du = b.ncols();
        if r_x.shape() != (dx, dx) {
            return Err(Error::dims("R_x must be d_x x d_x"));
        }
        if r_u.shape() != (du, du) {
            return Err(Error::dims("R_u must be d_u x d_u"));
        }
        if horizon == 0 {
            return Err(Error::bounds("horizon must be positive"));
        }
        for (name, m) in [("R_x", &r_x), ("R_u", &r_u)] {
            let asym = (m - m.transpose()).norm();
            if asym > 1e-9 * (1.0 + m.norm()) {
                return Err(Error::bounds(format!("{name} must be symmetric")));
            }
            let (vals, _) = symmetric_eigen_sorted(m);
            if vals.iter().any(|&v| v < -RANK_TOL) {
                return Err(Error::bounds(format!("{name} must be PSD")));
            }
        }
        Ok(Self { a, b, r_x, r_u, horizon })
    }

    pub fn dx(&self) -> usize {
        self.a.nrows()
    }

    pub fn du(&self) -> usize {
        self.b.ncols()
    }

    /// Stage cost x'R_x x + u'R_u u.
    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        (x.transpose() * &self.r_x * x)[(0, 0)] + (u.transpose() * &self.r_u * u)[(0, 0)]
    }
}

/// Spectral factorization of the steady-state cost matrix restricted to its
/// effective range: Sigma = U' Lambda U with eigenvector ROWS in `u`.
#[derive(Debug, Clone)]
pub struct SpectralSigma {
    /// Eigenvalues sorted descending, negatives clamped to zero.
    pub lambda: DVector<f64>,
    /// Eigenvectors as rows, so that sigma = u' * diag(lambda) * u.
    pub u: DMatrix<f64>,
    /// Number of eigenvalues above the rank tolerance.
    pub effective_rank: usize,
}

impl SpectralSigma {
    /// Rows of Lambda^{1/2} U restricted to the effective range (r x d_u).
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        let r = self.effective_rank;
        let mut out = self.u.rows(0, r).into_owned();
        for i in 0..r {
            let s = self.lambda[i].sqrt();
            for j in 0..out.ncols() {
                out[(i, j)] *= s;
            }
        }
        out
    }

    /// Rows of Lambda^{-1/2} U restricted to the effective range (r x d_u).
    pub fn inv_sqrt_factor(&self) -> DMatrix<f64> {
        let r = self.effective_rank;
        let mut out = self.u.rows(0, r).into_owned();
        for i in 0..r {
            let s = 1.0 / self.lambda[i].sqrt();
            for j in 0..out.ncols() {
                out[(i, j)] *= s;
            }
        }
        out
    }

    /// Pseudo-inverse on the effective range.
    pub fn pinv(&self) -> DMatrix<f64> {
        let r = self.effective_rank;
        let ur = self.u.rows(0, r);
        let mut scaled = ur.into_owned();
        for i in 0..r {
            for j in 0..scaled.ncols() {
                scaled[(i, j)] /= self.lambda[i];
            }
        }
        ur.transpose() * scaled
    }
}

/// All system-derived constants needed by the reduction.
#[derive(Debug, Clone)]
pub struct LqrConstants {
    pub p_inf: DMatrix<f64>,
    pub k_inf: DMatrix<f64>,
    pub sigma_inf: DMatrix<f64>,
    pub sigma_spectral: SpectralSigma,
    pub a_cl: DMatrix<f64>,
    /// Feedback delay of the induced regression problem.
    pub h: usize,
    pub gamma_inf: f64,
    pub kappa_inf: f64,
    pub beta_star: f64,
    pub psi_star: f64,
    pub gamma_star: f64,
}

/// Solve P = A'PA + R_x - A'PB (R_u + B'PB)^{-1} B'PA by fixed-point
/// iteration from P_0 = R_x, symmetrizing each step.
pub fn solve_dare(spec: &SystemSpec, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    let mut p = spec.r_x.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = riccati_map(spec, &p)?;
        residual = crate::linalg::sym_op_norm(&(&next - &p));
        p = 0.5 * (&next + next.transpose());
        if residual <= tol {
            // Residual of the returned iterate itself.
            let check = riccati_map(spec, &p)?;
            let res = crate::linalg::sym_op_norm(&(&check - &p));
            if res <= tol {
                return Ok(p);
            }
            residual = res;
        }
    }
    Err(Error::NonConvergent {
        residual,
        iters: max_iter,
        tol,
    })
}

/// One application of the Riccati map to P.
fn riccati_map(spec: &SystemSpec, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let atpa = spec.a.transpose() * p * &spec.a;
    let y = spec.b.transpose() * p * &spec.a; // d_u x d_x
    let correction = if y.norm() <= 1e-300 {
        DMatrix::zeros(spec.dx(), spec.dx())
    } else {
        let s = &spec.r_u + spec.b.transpose() * p * &spec.b;
        let sy = pinv_solve_checked(&s, &y, RANK_TOL)?;
        y.transpose() * sy
    };
    Ok(atpa + &spec.r_x - correction)
}

/// Optimal gain, steady-state cost matrix and closed-loop dynamics from P_inf.
pub fn compute_controller(
    spec: &SystemSpec,
    p_inf: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let sigma = &spec.r_u + spec.b.transpose() * p_inf * &spec.b;
    let sigma = 0.5 * (&sigma + sigma.transpose());
    let y = spec.b.transpose() * p_inf * &spec.a;
    let k_inf = if y.norm() <= 1e-300 {
        DMatrix::zeros(spec.du(), spec.dx())
    } else {
        pinv_solve_checked(&sigma, &y, RANK_TOL)?
    };
    let a_cl = &spec.a - &spec.b * &k_inf;
    Ok((k_inf, sigma, a_cl))
}

/// Eigendecomposition of the PSD matrix Sigma with pseudo-inverse semantics:
/// eigenvalues below `rank_tol` are clamped to exactly zero and excluded from
/// the effective range.
pub fn spectral_sigma(sigma_inf: &DMatrix<f64>, rank_tol: f64) -> SpectralSigma {
    let (vals, vecs) = symmetric_eigen_sorted(sigma_inf);
    let scale = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let mut lambda = vals.clone();
    let mut rank = 0;
    for i in 0..lambda.len() {
        if lambda[i] > rank_tol * scale {
            rank += 1;
        } else {
            lambda[i] = 0.0;
        }
    }
    SpectralSigma {
        lambda,
        u: vecs.transpose(),
        effective_rank: rank,
    }
}

/// Delay horizon h = ceil(2 (1 - gamma_inf)^{-1} log(kappa^2 beta^2 Psi Gamma^2 n^2)),
/// floored at 1.
pub fn compute_delay_h(
    gamma_inf: f64,
    kappa_inf: f64,
    beta_star: f64,
    psi_star: f64,
    gamma_star: f64,
    n: usize,
) -> Result<usize> {
    if !(0.0..1.0).contains(&gamma_inf) {
        return Err(Error::UnstableSystem { gamma_inf });
    }
    let inner = kappa_inf.powi(2) * beta_star.powi(2) * psi_star * gamma_star.powi(2)
        * (n as f64).powi(2);
    let h = (2.0 / (1.0 - gamma_inf)) * inner.ln();
    Ok((h.ceil() as i64).max(1) as usize)
}

/// Bundles the plant description with its derived constants.
#[derive(Debug, Clone)]
pub struct LqrSystem {
    pub spec: SystemSpec,
    pub consts: LqrConstants,
}

impl LqrSystem {
    /// Solve for all constants. Rejects systems without a stabilizing
    /// solution (spectral radius of A - B K_inf must be below one).
    pub fn derive(spec: SystemSpec) -> Result<Self> {
        let p_inf = solve_dare(&spec, TOL_DARE, MAX_DARE_ITER)?;
        let (k_inf, sigma_inf, a_cl) = compute_controller(&spec, &p_inf)?;
        let rho = spectral_radius(&a_cl);
        if rho >= 1.0 - 1e-9 {
            return Err(Error::UnstableSystem { gamma_inf: rho });
        }
        let sigma_spectral = spectral_sigma(&sigma_inf, RANK_TOL);

        // Constants computed on the effective range of P_inf so the singular
        // lower-bound system stays finite.
        let (p_vals, p_vecs) = symmetric_eigen_sorted(&p_inf);
        let p_scale = p_vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
        let p_rank = p_vals.iter().filter(|&&v| v > RANK_TOL * p_scale).count();
        let (gamma_inf, kappa_inf) = if p_rank == 0 {
            (0.0, 1.0)
        } else {
            let vr = p_vecs.columns(0, p_rank).into_owned();
            let mut inv_sqrt = vr.clone();
            for i in 0..p_rank {
                let s = 1.0 / p_vals[i].sqrt();
                for r in 0..inv_sqrt.nrows() {
                    inv_sqrt[(r, i)] *= s;
                }
            }
            // I_r - Lambda^{-1/2} V' R_x V Lambda^{-1/2}
            let w = inv_sqrt.transpose() * &spec.r_x * &inv_sqrt;
            let m = DMatrix::identity(p_rank, p_rank) - w;
            let gamma_inf = crate::linalg::sym_op_norm(&m).sqrt();
            let lmax = p_vals[0];
            let lmin = p_vals[p_rank - 1];
            (gamma_inf, (lmax / lmin).sqrt())
        };

        let beta_star = {
            let mut b = 1.0f64;
            if let Some(l) = min_effective_eigenvalue(&spec.r_u, RANK_TOL) {
                b = b.max(1.0 / l);
            }
            if let Some(l) = min_effective_eigenvalue(&spec.r_x, RANK_TOL) {
                b = b.max(1.0 / l);
            }
            b
        };
        let psi_star = [
            1.0,
            op_norm(&spec.a),
            op_norm(&spec.b),
            op_norm(&spec.r_x),
            op_norm(&spec.r_u),
        ]
        .into_iter()
        .fold(0.0f64, f64::max);
        let gamma_star = op_norm(&p_inf).max(1.0);
        let h = compute_delay_h(gamma_inf, kappa_inf, beta_star, psi_star, gamma_star, spec.horizon)?;

        Ok(Self {
            spec,
            consts: LqrConstants {
                p_inf,
                k_inf,
                sigma_inf,
                sigma_spectral,
                a_cl,
                h,
                gamma_inf,
                kappa_inf,
                beta_star,
                psi_star,
                gamma_star,
            },
        })
    }

    /// Truncated feedforward target Sigma^+ sum_{j=1..h} B' A_cl^{j-1} P w_{t+j}
    /// over the supplied future disturbances.
    pub fn q_inf(&self, future: &[DVector<f64>]) -> DVector<f64> {
        let du = self.spec.du();
        if future.is_empty() {
            return DVector::zeros(du);
        }
        let mut acc = &self.consts.p_inf * &future[future.len() - 1];
        for w in future.iter().rev().skip(1) {
            acc = &self.consts.a_cl * acc + &self.consts.p_inf * w;
        }
        self.consts.sigma_spectral.pinv() * (self.spec.b.transpose() * acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn scalar_spec(a: f64, b: f64, rx: f64, ru: f64, n: usize) -> SystemSpec {
        SystemSpec::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, rx),
            DMatrix::from_element(1, 1, ru),
            n,
        )
        .unwrap()
    }

    pub(crate) fn lower_bound_spec(n: usize) -> SystemSpec {
        SystemSpec::new(
            DMatrix::zeros(2, 2),
            -DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
            DMatrix::zeros(2, 2),
            n,
        )
        .unwrap()
    }

    #[test]
    fn dare_zero_a_returns_rx() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let d = rng.gen_range(1..4usize);
            let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            let rx = &m * m.transpose();
            let spec = SystemSpec::new(
                DMatrix::zeros(d, d),
                DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0)),
                rx.clone(),
                DMatrix::identity(d, d),
                8,
            )
            .unwrap();
            let p = solve_dare(&spec, TOL_DARE, MAX_DARE_ITER).unwrap();
            assert!((p - rx).norm() <= 1e-12);
        }
    }

    #[test]
    fn dare_scalar_geometric_series() {
        // B = 0: P = sum_k a^{2k} rx = rx / (1 - a^2) = 4/3.
        let spec = scalar_spec(0.5, 0.0, 1.0, 1.0, 8);
        let p = solve_dare(&spec, TOL_DARE, MAX_DARE_ITER).unwrap();
        assert_relative_eq!(p[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
    }

    /// Independent 1-D oracle: bisection on p - riccati(p).
    fn scalar_dare_root(a: f64, b: f64, rx: f64, ru: f64) -> f64 {
        let f = |p: f64| p - (a * p * a + rx - a * p * b * (ru + b * p * b).recip() * b * p * a);
        let (mut lo, mut hi) = (0.0f64, 1e6f64);
        assert!(f(lo) <= 0.0 && f(hi) >= 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn dare_scalar_fixed_point_matches_root_search() {
        let spec = scalar_spec(0.5, 1.0, 1.0, 1.0, 8);
        let p = solve_dare(&spec, 1e-12, MAX_DARE_ITER).unwrap();
        let oracle = scalar_dare_root(0.5, 1.0, 1.0, 1.0);
        assert_relative_eq!(p[(0, 0)], oracle, epsilon = 1e-9);
        // Closed form root of p^2 - 0.25 p - 1 = 0.
        let exact = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        assert_relative_eq!(p[(0, 0)], exact, epsilon = 1e-10);
    }

    #[test]
    fn controller_zero_a_gives_zero_gain() {
        let sys = LqrSystem::derive(lower_bound_spec(16)).unwrap();
        assert!(sys.consts.k_inf.norm() <= 1e-12);
        // Sigma = B' R_x B = R_x for B = -I.
        assert_relative_eq!(sys.consts.sigma_inf[(0, 0)], 1.0, epsilon = 1e-12);
        assert!(sys.consts.sigma_inf[(1, 1)].abs() <= 1e-12);
        assert_eq!(sys.consts.sigma_spectral.effective_rank, 1);
    }

    #[test]
    fn controller_scalar_consistent_with_dare() {
        let spec = scalar_spec(0.5, 1.0, 1.0, 1.0, 8);
        let p = solve_dare(&spec, TOL_DARE, MAX_DARE_ITER).unwrap();
        let (k, sigma, a_cl) = compute_controller(&spec, &p).unwrap();
        let pv = p[(0, 0)];
        assert_relative_eq!(k[(0, 0)], 0.5 * pv / (1.0 + pv), epsilon = 1e-12);
        assert_relative_eq!(sigma[(0, 0)], 1.0 + pv, epsilon = 1e-12);
        assert_relative_eq!(a_cl[(0, 0)], 0.5 - k[(0, 0)], epsilon = 1e-12);
        assert!(spectral_radius(&a_cl) < 1.0);
    }

    #[test]
    fn spectral_identity_and_rank() {
        let s = spectral_sigma(&DMatrix::identity(3, 3), RANK_TOL);
        assert_eq!(s.effective_rank, 3);
        let rec = s.u.transpose() * DMatrix::from_diagonal(&s.lambda) * &s.u;
        assert!((rec - DMatrix::identity(3, 3)).norm() <= TOL_EIG);

        let s2 = spectral_sigma(
            &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
            RANK_TOL,
        );
        assert_eq!(s2.effective_rank, 1);
    }

    #[test]
    fn spectral_random_psd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let psd = &m * m.transpose();
            let s = spectral_sigma(&psd, RANK_TOL);
            let rec = s.u.transpose() * DMatrix::from_diagonal(&s.lambda) * &s.u;
            assert!((rec - &psd).norm() <= 1e-10);
            // Orthonormal rows.
            let gram = &s.u * s.u.transpose();
            assert!((gram - DMatrix::identity(3, 3)).norm() <= TOL_EIG);
        }
    }

    #[test]
    fn delay_h_examples() {
        assert_eq!(compute_delay_h(0.5, 1.0, 1.0, 1.0, 1.0, 1).unwrap(), 1);
        let h10 = compute_delay_h(0.5, 1.0, 1.0, 1.0, 1.0, 10).unwrap();
        assert_eq!(h10, (4.0 * 100.0f64.ln()).ceil() as usize);
        assert!(compute_delay_h(1.0, 1.0, 1.0, 1.0, 1.0, 4).is_err());
    }

    #[test]
    fn delay_h_monotone_in_n() {
        let mut prev = 0;
        for n in [1usize, 2, 4, 16, 256, 4096] {
            let h = compute_delay_h(0.3, 2.0, 1.5, 1.2, 3.0, n).unwrap();
            assert!(h >= prev);
            prev = h;
        }
    }

    #[test]
    fn delay_h_finite_for_lower_bound_system() {
        let sys = LqrSystem::derive(lower_bound_spec(4096)).unwrap();
        assert_relative_eq!(sys.consts.gamma_inf, 0.0, epsilon = 1e-9);
        assert_relative_eq!(sys.consts.kappa_inf, 1.0, epsilon = 1e-12);
        assert_relative_eq!(sys.consts.beta_star, 1.0, epsilon = 1e-12);
        let expected = (4.0 * 4096.0f64.ln()).ceil() as usize;
        assert_eq!(sys.consts.h, expected);
    }

    #[test]
    fn q_inf_examples() {
        let sys = LqrSystem::derive(lower_bound_spec(16)).unwrap();
        // A_cl = 0: only the first term survives.
        let w1 = DVector::from_vec(vec![0.6, 0.4]);
        let w2 = DVector::from_vec(vec![-0.3, 0.1]);
        let q = sys.q_inf(&[w1.clone(), w2.clone()]);
        let single = sys.q_inf(&[w1.clone()]);
        assert!((q - &single).norm() <= 1e-14);
        // Sigma^+ B' P w = diag(1,0) * (-I) * diag(1,0) * w = [-w_1, 0].
        assert_relative_eq!(single[0], -0.6, epsilon = 1e-12);
        assert_relative_eq!(single[1], 0.0, epsilon = 1e-12);

        let zeros = sys.q_inf(&[DVector::zeros(2), DVector::zeros(2)]);
        assert!(zeros.norm() == 0.0);
    }

    #[test]
    fn q_inf_matches_term_by_term_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.4..0.4));
        let b = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let spec = SystemSpec::new(a, b, DMatrix::identity(2, 2), DMatrix::identity(2, 2), 16)
            .unwrap();
        let sys = LqrSystem::derive(spec).unwrap();
        let future: Vec<DVector<f64>> = (0..3)
            .map(|_| {
                let v = DVector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5));
                v
            })
            .collect();
        let q = sys.q_inf(&future);
        // Naive oracle with explicit matrix powers.
        let mut sum = DVector::zeros(2);
        let mut pow = DMatrix::identity(2, 2);
        for w in &future {
            sum += sys.spec.b.transpose() * (&pow * (&sys.consts.p_inf * w));
            pow = &sys.consts.a_cl * pow;
        }
        let oracle = sys.consts.sigma_spectral.pinv() * sum;
        assert!((q - oracle).norm() <= 1e-12);
    }

    #[test]
    fn q_inf_linear_superposition() {
        let sys = LqrSystem::derive(scalar_spec(0.5, 1.0, 1.0, 1.0, 16)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u: Vec<DVector<f64>> = (0..4)
                .map(|_| DVector::from_fn(1, |_, _| rng.gen_range(-0.5..0.5)))
                .collect();
            let v: Vec<DVector<f64>> = (0..4)
                .map(|_| DVector::from_fn(1, |_, _| rng.gen_range(-0.5..0.5)))
                .collect();
            let sum: Vec<DVector<f64>> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            let lhs = sys.q_inf(&sum);
            let rhs = sys.q_inf(&u) + sys.q_inf(&v);
            assert!((lhs - rhs).norm() <= 1e-12);
        }
    }

    #[test]
    fn random_stabilizable_systems_accept() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let dx = rng.gen_range(1..4usize);
            let du = rng.gen_range(1..4usize);
            let mut a = DMatrix::from_fn(dx, dx, |_, _| rng.gen_range(-1.0..1.0));
            let rho = spectral_radius(&a);
            if rho > 0.9 {
                a *= 0.9 / rho;
            }
            let b = DMatrix::from_fn(dx, du, |_, _| rng.gen_range(-1.0..1.0));
            let spec = SystemSpec::new(a, b, DMatrix::identity(dx, dx), DMatrix::identity(du, du), 64)
                .unwrap();
            let sys = LqrSystem::derive(spec.clone()).unwrap();
            let rec = riccati_map(&spec, &sys.consts.p_inf).unwrap();
            assert!(crate::linalg::sym_op_norm(&(rec - &sys.consts.p_inf)) <= 1e-9);
            assert!(spectral_radius(&sys.consts.a_cl) < 1.0);
        }
    }
}
