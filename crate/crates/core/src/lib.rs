//! Proper nonstationary online linear regression and its instantiation for
//! LQR control under adversarial disturbances.
//!
//! The regression learner keeps a follow-the-leading-history aggregate of
//! online-Newton-step base learners on an enclosing coordinate box, plays the
//! min-max projection of its prediction into the true decision set, and
//! learns from barrier-augmented surrogate losses. A round-robin wrapper
//! handles delayed feedback. The control layer reduces LQR with known
//! dynamics to this regression problem: covariates are Kronecker products of
//! recent disturbances with the spectral factor of the steady-state cost
//! matrix, targets are delayed truncated feedforward terms, and the learned
//! coefficients deflatten into disturbance-action policies.

pub mod barrier;
pub mod dap;
pub mod error;
pub mod flh;
pub mod harness;
pub mod linalg;
pub mod lqr;
pub mod ons;
pub mod pipeline;
pub mod prodr;

pub use error::{Error, Result};
