//! Wasserstein medians of probability measures.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dr;
pub mod error;
pub mod experiments;
pub mod geom;
pub mod grid2d;
pub mod io;
pub mod median1d;
pub mod plaplace;
pub mod prox;
pub mod weights;

pub use error::{Error, Result};
pub use weights::Weights;
