//! Disturbance-action policies: evaluation, the flatten/deflatten
//! isomorphism between parameter matrices and regression vectors, feasibility
//! projection onto per-block spectral balls, and total-variation accounting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::op_norm;

/// Shared class parameters of the policy set: block i must satisfy
/// |M^[i]|_op <= r * gamma^{i-1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DapClass {
    pub m: usize,
    pub r: f64,
    pub gamma: f64,
    pub d_u: usize,
    pub d_x: usize,
}

impl DapClass {
    pub fn new(m: usize, r: f64, gamma: f64, d_u: usize, d_x: usize) -> Result<Self> {
        if m == 0 || d_u == 0 || d_x == 0 {
            return Err(Error::bounds("DAP class dimensions must be positive"));
        }
        if r <= 0.0 || gamma <= 0.0 || gamma > 1.0 {
            return Err(Error::bounds("DAP class needs r > 0 and gamma in (0, 1]"));
        }
        Ok(Self { m, r, gamma, d_u, d_x })
    }

    /// Operator-norm bound of block i (zero-based).
    pub fn block_bound(&self, i: usize) -> f64 {
        self.r * self.gamma.powi(i as i32)
    }

    /// Length of the flattened parameter vector.
    pub fn flat_dim(&self) -> usize {
        self.m * self.d_u * self.d_x
    }
}

/// One policy: `m` matrices of shape d_u x d_x acting on past disturbances.
#[derive(Debug, Clone, PartialEq)]
pub struct DapParams {
    pub class: DapClass,
    pub blocks: Vec<DMatrix<f64>>,
}

impl DapParams {
    pub fn new(class: DapClass, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.len() != class.m {
            return Err(Error::dims(format!(
                "expected {} blocks, got {}",
                class.m,
                blocks.len()
            )));
        }
        for b in &blocks {
            if b.shape() != (class.d_u, class.d_x) {
                return Err(Error::dims("DAP block has wrong shape"));
            }
        }
        Ok(Self { class, blocks })
    }

    pub fn zeros(class: DapClass) -> Self {
        let blocks = (0..class.m)
            .map(|_| DMatrix::zeros(class.d_u, class.d_x))
            .collect();
        Self { class, blocks }
    }

    /// Membership in the policy set up to `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.blocks
            .iter()
            .enumerate()
            .all(|(i, b)| op_norm(b) <= self.class.block_bound(i) + tol)
    }
}

/// Control signal -K_inf x - sum_i M^[i] w_{t-i}. `history` holds
/// (w_{t-1}, ..., w_{t-m}); shorter histories are zero-padded.
pub fn dap_control(
    params: &DapParams,
    k_inf: &DMatrix<f64>,
    x: &DVector<f64>,
    history: &[DVector<f64>],
) -> Result<DVector<f64>> {
    if k_inf.ncols() != x.len() {
        return Err(Error::dims("K_inf and state dimensions disagree"));
    }
    let mut u = -(k_inf * x);
    for (i, w) in history.iter().take(params.class.m).enumerate() {
        if w.len() != params.class.d_x {
            return Err(Error::dims("disturbance dimension mismatch"));
        }
        u -= &params.blocks[i] * w;
    }
    Ok(u)
}

/// Stack the columns of each block, blocks in order: the regression
/// coordinates the covariate construction expects.
pub fn flatten(params: &DapParams) -> DVector<f64> {
    let c = params.class;
    let mut z = DVector::zeros(c.flat_dim());
    let mut at = 0;
    for b in &params.blocks {
        for j in 0..c.d_x {
            for i in 0..c.d_u {
                z[at] = b[(i, j)];
                at += 1;
            }
        }
    }
    z
}

/// Exact inverse of [flatten].
pub fn deflatten(z: &DVector<f64>, class: DapClass) -> Result<DapParams> {
    if z.len() != class.flat_dim() {
        return Err(Error::dims(format!(
            "flattened length {} != m*d_u*d_x = {}",
            z.len(),
            class.flat_dim()
        )));
    }
    let mut blocks = Vec::with_capacity(class.m);
    let mut at = 0;
    for _ in 0..class.m {
        let mut b = DMatrix::zeros(class.d_u, class.d_x);
        for j in 0..class.d_x {
            for i in 0..class.d_u {
                b[(i, j)] = z[at];
                at += 1;
            }
        }
        blocks.push(b);
    }
    DapParams::new(class, blocks)
}

/// Clip each block's singular values to its spectral bound. Feasible blocks
/// pass through unchanged; the result is the Frobenius-nearest feasible point.
pub fn project_dap(params: &DapParams) -> DapParams {
    let blocks = params
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| clip_operator_norm(b, params.class.block_bound(i)))
        .collect();
    DapParams {
        class: params.class,
        blocks,
    }
}

/// Frobenius projection onto the spectral-norm ball of radius `bound`.
pub fn clip_operator_norm(m: &DMatrix<f64>, bound: f64) -> DMatrix<f64> {
    if op_norm(m) <= bound {
        return m.clone();
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut s = svd.singular_values.clone();
    for v in s.iter_mut() {
        *v = v.min(bound);
    }
    let k = s.len();
    let mut us = u.columns(0, k).into_owned();
    for (j, sv) in s.iter().enumerate() {
        for i in 0..us.nrows() {
            us[(i, j)] *= *sv;
        }
    }
    us * vt.rows(0, k)
}

/// A time-indexed sequence of policies sharing one class.
#[derive(Debug, Clone)]
pub struct DapSequence {
    pub class: DapClass,
    pub params: Vec<DapParams>,
}

impl DapSequence {
    pub fn new(class: DapClass, params: Vec<DapParams>) -> Result<Self> {
        if params.iter().any(|p| p.class != class) {
            return Err(Error::dims("sequence elements must share the class"));
        }
        Ok(Self { class, params })
    }

    pub fn constant(params: DapParams, n: usize) -> Self {
        Self {
            class: params.class,
            params: vec![params; n],
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Total variation: sum over consecutive rounds and blocks of the entrywise
/// absolute difference mass.
pub fn tv_of_sequence(seq: &DapSequence) -> f64 {
    let mut tv = 0.0;
    for t in 1..seq.params.len() {
        tv += tv_between(&seq.params[t - 1], &seq.params[t]);
    }
    tv
}

/// Entrywise L1 distance between two policies, summed over blocks.
pub fn tv_between(a: &DapParams, b: &DapParams) -> f64 {
    a.blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| (x - y).iter().map(|v| v.abs()).sum::<f64>())
        .sum()
}
