use thiserror::Error;

/// Errors raised by the median solvers, oracles and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: expected side {expected}, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("right-hand side has mean {mean:e}, outside the range of the Neumann Laplacian")]
    NonZeroMeanRhs { mean: f64 },

    #[error("sample masses are inconsistent with the median mass (|difference| = {discrepancy:e})")]
    InfeasibleMass { discrepancy: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// The median solver hit its iteration cap; the partial solution is kept.
    #[error(
        "Douglas-Rachford stopped after {} iterations with residual {:e}",
        .0.iterations,
        .0.final_residual
    )]
    MedianNoConvergence(Box<crate::dr::MedianSolution>),

    /// The p-Laplace minimization hit its iteration cap.
    #[error(
        "p-Laplace minimization stopped after {} iterations (projected gradient {:e})",
        .0.report.iterations,
        .0.report.projected_gradient_norm
    )]
    PLaplaceNoConvergence(Box<crate::plaplace::PLaplaceSolution>),

    #[error("atom budget exceeded: {needed} atoms needed, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
