//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Operator (spectral) norm: largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Operator norm of a symmetric matrix via its eigenvalues.
pub fn sym_op_norm(m: &DMatrix<f64>) -> f64 {
    symmetric_eigen_sorted(m)
        .0
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()))
}

/// Nuclear norm: sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// Induced 1-norm: maximum absolute column sum.
pub fn induced_one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral radius: maximum eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted descending.
/// Returns (eigenvalues, eigenvectors as columns), so m = V diag(l) V'.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Solve S y = x for symmetric PSD S using the effective (pseudo-inverse) range.
///
/// Errors with `SingularInnerMatrix` when x has a component in the numerical
/// null space of S, i.e. the system is inconsistent.
pub fn pinv_solve_checked(s: &DMatrix<f64>, x: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = symmetric_eigen_sorted(s);
    let scale = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let thresh = rank_tol * scale;
    // Coordinates of x in the eigenbasis.
    let coords = vecs.transpose() * x;
    let mut solved = coords.clone();
    for i in 0..vals.len() {
        if vals[i] > thresh {
            for j in 0..solved.ncols() {
                solved[(i, j)] = coords[(i, j)] / vals[i];
            }
        } else {
            // Null direction: the right-hand side must vanish there.
            for j in 0..solved.ncols() {
                if coords[(i, j)].abs() > thresh.max(1e-12) * x.column(j).norm().max(1.0) {
                    return Err(Error::SingularInnerMatrix);
                }
                solved[(i, j)] = 0.0;
            }
        }
    }
    Ok(&vecs * solved)
}

/// Smallest eigenvalue above `tol` of a symmetric PSD matrix.
/// Returns None when the matrix is numerically zero.
pub fn min_effective_eigenvalue(m: &DMatrix<f64>, tol: f64) -> Option<f64> {
    let (vals, _) = symmetric_eigen_sorted(m);
    vals.iter().rev().find(|&&v| v > tol).copied()
}

/// Kahan-compensated sum.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
