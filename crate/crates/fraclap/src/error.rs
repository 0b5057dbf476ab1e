//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FracError {
    /// An input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Gamma function evaluated at a pole (non-positive integer).
    #[error("gamma pole at x = {x}")]
    GammaPole { x: f64 },

    /// Adaptive quadrature could not meet the requested tolerance within
    /// its evaluation budget.
    #[error(
        "quadrature did not converge: requested tol {requested:.3e}, \
         achieved {achieved:.3e} after {evaluations} evaluations"
    )]
    QuadratureNonConvergence {
        requested: f64,
        achieved: f64,
        evaluations: usize,
    },

    /// The requested tolerance cannot be met by this operation on this
    /// input (for example, a singular integrand whose floating-point
    /// noise floor exceeds the target).
    #[error("tolerance {requested:.3e} unattainable: {reason}")]
    ToleranceUnattainable { requested: f64, reason: String },

    /// A step/sample budget ran out before the computation finished.
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    /// Integrand or sampler produced a non-finite value.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, FracError>;
