//! Exact and asymptotic likelihood computations for mean-zero Gaussian
//! random fields with separable Matérn-3/2 covariance on a regular
//! `d`-dimensional lattice `{1/n, …, 1}^d`.
//!
//! The per-axis correlation matrix `R_{θ,n}` has closed-form determinant and
//! inverse ([`structured_linalg`]); the lattice covariance is a Kronecker
//! product of these, so the likelihood costs `O(d n^{d+1})`
//! ([`likelihood`]).

pub mod asymptotics;
pub mod cache;
pub mod dd;
pub mod error;
pub mod estimation;
pub mod kernel;
pub mod likelihood;
pub mod oracle;
pub mod sampling;
pub mod signed_log;
pub mod structured_linalg;
pub mod tensor;
pub mod validation;

pub use error::{GridError, Result};
pub use kernel::{GridSpec, ModelParams, ScalarContext};
pub use likelihood::LatticeField;
pub use signed_log::SignedLog;
