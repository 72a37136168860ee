//! Linear algebra, special functions, quadrature and random variates.

pub mod linalg;
pub mod quadrature;
pub mod random;
pub mod special;

pub use linalg::{cholesky, logdet_from_cholesky, solve_spd, CholeskyFactor, SymMatrix};
pub use quadrature::{
    integrate_interval, integrate_unit_interval, log_integrate_unit_interval, QuadratureRule,
};
pub use random::{chain_rng, sample_truncated_extended_gamma, ChainRng};
pub use special::{kummer_log_m, ln_beta, ln_gamma, log_sum_exp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("quadrature did not converge (estimate {estimate}, error {error})")]
    QuadratureNonConvergence { estimate: f64, error: f64 },
}
