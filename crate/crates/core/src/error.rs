//! Error types shared across the crate.

use thiserror::Error;

/// Errors surfaced by the solvers, learners and the simulation harness.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Riccati fixed-point iteration did not reach the residual tolerance.
    #[error("Riccati iteration did not converge: residual {residual:.3e} after {iters} iterations (tol {tol:.3e})")]
    NonConvergent {
        residual: f64,
        iters: usize,
        tol: f64,
    },

    /// The inner matrix R_u + B'PB is singular in a direction that matters.
    #[error("inner matrix R_u + B'PB is singular along a required direction")]
    SingularInnerMatrix,

    /// The closed loop is not a contraction; delay horizon is undefined.
    #[error("unstable system: gamma_inf = {gamma_inf} >= 1")]
    UnstableSystem { gamma_inf: f64 },

    /// Shape mismatch between operands.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// The min-max projection stopped above its optimality certificate.
    #[error("min-max projection did not converge: best objective {best:.6e}, gap {gap:.3e}")]
    SolverNonConvergent { best: f64, gap: f64 },

    /// The Mahalanobis box projection stopped above tolerance.
    #[error("Mahalanobis projection did not converge: residual {residual:.3e}")]
    ProjectionNonConvergent { residual: f64 },

    /// A recovered disturbance broke the unit-norm contract.
    #[error("disturbance bound violated at round {round}: |w| = {norm}")]
    DisturbanceBoundViolated { round: usize, norm: f64 },

    /// Simulated state grew beyond the abort threshold.
    #[error("numerical overflow at round {round}: |x| = {norm:.3e}")]
    NumericalOverflow { round: usize, norm: f64 },

    /// Configuration inputs outside their admissible ranges.
    #[error("invalid bounds: {context}")]
    InvalidBounds { context: String },

    /// Nonpositive variation budget passed to the adversary builder.
    #[error("invalid budget: C_n = {budget} must be positive")]
    InvalidBudget { budget: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }

    pub(crate) fn bounds(context: impl Into<String>) -> Self {
        Error::InvalidBounds {
            context: context.into(),
        }
    }
}
