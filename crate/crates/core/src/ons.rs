//! Online Newton Step over a coordinate box: rank-one preconditioner updates
//! with a Sherman-Morrison maintained inverse, and a generalized (Mahalanobis)
//! projection back into the box solved by an active-set projected Newton
//! iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Projection tolerance on the projected-gradient residual.
pub const TOL_PROJ: f64 = 1e-8;
/// Iteration budget of the box projection.
pub const MAX_PROJ_ITER: usize = 500;
/// Full inverse refactorization cadence.
const REFACTOR_EVERY: usize = 256;

/// Base-learner state: current iterate, accumulated preconditioner
/// A = zeta I + sum of gradient outer products, and its maintained inverse.
#[derive(Debug, Clone)]
pub struct OnsState {
    pub w: DVector<f64>,
    pub a_acc: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    pub zeta: f64,
    pub box_radius: f64,
    pub start_time: usize,
    updates_since_refactor: usize,
}

impl OnsState {
    /// Fresh learner predicting the origin. The box must contain zero, which
    /// it does for any positive radius.
    pub fn init(dim: usize, zeta: f64, box_radius: f64, start_time: usize) -> Result<Self> {
        if zeta <= 0.0 {
            return Err(Error::bounds("ONS zeta must be positive"));
        }
        if box_radius <= 0.0 {
            return Err(Error::bounds("box radius must be positive"));
        }
        Ok(Self {
            w: DVector::zeros(dim),
            a_acc: DMatrix::identity(dim, dim) * zeta,
            a_inv: DMatrix::identity(dim, dim) / zeta,
            zeta,
            box_radius,
            start_time,
            updates_since_refactor: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// One step: accumulate the gradient outer product, take the Newton
    /// candidate w - (1/zeta) A^{-1} grad, and project back into the box in
    /// the metric of the updated preconditioner.
    pub fn update(&mut self, grad: &DVector<f64>) -> Result<()> {
        if grad.len() != self.dim() {
            return Err(Error::dims("gradient dimension mismatch"));
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::bounds("gradient must be finite"));
        }
        // Rank-one update of A and its inverse.
        self.a_acc.ger(1.0, grad, grad, 1.0);
        symmetrize(&mut self.a_acc);
        self.updates_since_refactor += 1;
        if self.updates_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        } else {
            let u = &self.a_inv * grad;
            let denom = 1.0 + grad.dot(&u);
            self.a_inv.ger(-1.0 / denom, &u, &u, 1.0);
            symmetrize(&mut self.a_inv);
        }
        let candidate = &self.w - (1.0 / self.zeta) * (&self.a_inv * grad);
        self.w = project_box_mahalanobis(&self.a_acc, &candidate, self.box_radius)?;
        Ok(())
    }

    fn refactor(&mut self) -> Result<()> {
        let chol = self
            .a_acc
            .clone()
            .cholesky()
            .ok_or(Error::SingularInnerMatrix)?;
        self.a_inv = chol.inverse();
        self.updates_since_refactor = 0;
        Ok(())
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// argmin_{|x|_inf <= radius} (x - y)' A (x - y), solved by projected Newton
/// with active-set identification. Candidates already inside the box are
/// returned unchanged.
pub fn project_box_mahalanobis(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    radius: f64,
) -> Result<DVector<f64>> {
    let n = y.len();
    if y.iter().all(|&v| v.abs() <= radius) {
        return Ok(y.clone());
    }
    let mut x = DVector::from_iterator(n, y.iter().map(|&v| v.clamp(-radius, radius)));
    // Residual r = A (x - y); optimality: r_j = 0 for free coordinates,
    // r_j <= 0 at the upper bound, r_j >= 0 at the lower bound.
    let scale = a.diagonal().amax().max(1.0) * radius.max(1.0);
    for _ in 0..MAX_PROJ_ITER {
        let r = a * (&x - y);
        let mut free: Vec<usize> = Vec::with_capacity(n);
        let mut residual = 0.0f64;
        for j in 0..n {
            let at_upper = x[j] >= radius - 1e-14 * radius.max(1.0);
            let at_lower = x[j] <= -radius + 1e-14 * radius.max(1.0);
            let viol = if at_upper {
                r[j].max(0.0)
            } else if at_lower {
                (-r[j]).max(0.0)
            } else {
                r[j].abs()
            };
            residual = residual.max(viol);
            let binding = (at_upper && r[j] <= 0.0) || (at_lower && r[j] >= 0.0);
            if !binding {
                free.push(j);
            }
        }
        if residual <= TOL_PROJ * scale {
            return Ok(x);
        }
        if free.is_empty() {
            return Ok(x);
        }
        // Newton step on the free block: solve A_ff d = -r_f.
        let k = free.len();
        let mut aff = DMatrix::zeros(k, k);
        let mut rf = DVector::zeros(k);
        for (ii, &i) in free.iter().enumerate() {
            rf[ii] = r[i];
            for (jj, &j) in free.iter().enumerate() {
                aff[(ii, jj)] = a[(i, j)];
            }
        }
        let d = match aff.clone().cholesky() {
            Some(ch) => ch.solve(&(-&rf)),
            None => -&rf / aff.diagonal().amax().max(1e-300),
        };
        // Project the stepped point; backtrack if the quadratic did not drop.
        let obj = |x: &DVector<f64>| -> f64 {
            let d = x - y;
            (d.transpose() * a * &d)[(0, 0)]
        };
        let base = obj(&x);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = x.clone();
            for (ii, &i) in free.iter().enumerate() {
                trial[i] = (trial[i] + step * d[ii]).clamp(-radius, radius);
            }
            if trial == x {
                break;
            }
            if obj(&trial) <= base + 1e-18 * scale * scale {
                x = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No admissible movement left; fall through to the certificate.
            break;
        }
    }
    // Final certificate check.
    let r = a * (&x - y);
    let mut residual = 0.0f64;
    for j in 0..y.len() {
        let at_upper = x[j] >= radius - 1e-14 * radius.max(1.0);
        let at_lower = x[j] <= -radius + 1e-14 * radius.max(1.0);
        let viol = if at_upper {
            r[j].max(0.0)
        } else if at_lower {
            (-r[j]).max(0.0)
        } else {
            r[j].abs()
        };
        residual = residual.max(viol);
    }
    if residual <= TOL_PROJ * scale * 10.0 {
        Ok(x)
    } else {
        Err(Error::ProjectionNonConvergent { residual })
    }
}

/// The quadratic surrogate of an exp-concave loss anchored at a played point:
/// f(x) = (sqrt(alpha/2) g'(x - anchor) + 1/sqrt(2 alpha))^2.
#[derive(Debug, Clone)]
pub struct ExpConcaveSurrogate {
    pub grad: DVector<f64>,
    pub anchor: DVector<f64>,
    pub alpha: f64,
    half_alpha_sqrt: f64,
    offset: f64,
}

impl ExpConcaveSurrogate {
    pub fn new(grad: DVector<f64>, anchor: DVector<f64>, alpha: f64) -> Result<Self> {
        if alpha <= 0.0 {
            return Err(Error::bounds("exp-concavity parameter must be positive"));
        }
        Ok(Self {
            half_alpha_sqrt: (alpha / 2.0).sqrt(),
            offset: 1.0 / (2.0 * alpha).sqrt(),
            grad,
            anchor,
            alpha,
        })
    }

    fn inner(&self, x: &DVector<f64>) -> f64 {
        self.half_alpha_sqrt * self.grad.dot(&(x - &self.anchor)) + self.offset
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let v = self.inner(x);
        v * v
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        2.0 * self.inner(x) * self.half_alpha_sqrt * &self.grad
    }
}
