//! Discrete calculus on a `p × p` cell grid.
//!
//! Cells are indexed `(i, j)` with `i` the first (x) direction and stored
//! row-major at `i * p + j`. Spacing is one: every operator here is written
//! for unit cells, and flows can be rescaled by `h = 1/p` afterwards if
//! physical units matter.
//!
//! The gradient uses forward differences with homogeneous Neumann boundary
//! conditions (the last difference in each direction is zero), and the
//! divergence is its negative adjoint, so `Σ div σ = 0` for every flow.

mod cg;
mod fields;
mod tensor;

pub use cg::{solve_neumann_poisson, solve_neumann_poisson_from, solve_shifted, solve_shifted_from};
pub use fields::{FlowField, Grid, GridMeasure, ScalarField, MASS_TOL};
pub use tensor::TensorSolver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the elliptic systems of the flow projection are solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonBackend {
    /// [`TensorSolver`]: exact up to rounding, two matrix products a solve.
    Direct,
    /// Warm-started Jacobi-preconditioned CG to relative residual `tol`.
    ConjugateGradient { max_iter: usize },
}

impl Default for PoissonBackend {
    fn default() -> Self {
        Self::Direct
    }
}

/// Largest mean a Poisson right-hand side may have before it is rejected
/// rather than projected onto the range of the Laplacian.
pub const MEAN_TOL: f64 = 1e-9;

pub fn check_same_grid(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::GridMismatch { expected, got })
    }
}

/// Forward-difference gradient into `out`.
pub fn grad_into(u: &ScalarField, out: &mut FlowField) {
    let p = u.side();
    let u = u.as_slice();
    let (vx, vy) = out.components_mut();
    for i in 0..p {
        for j in 0..p {
            let c = i * p + j;
            vx[c] = if i + 1 < p { u[c + p] - u[c] } else { 0.0 };
            vy[c] = if j + 1 < p { u[c + 1] - u[c] } else { 0.0 };
        }
    }
}

/// Forward-difference gradient with Neumann boundary.
pub fn grad_h(u: &ScalarField) -> FlowField {
    let mut out = FlowField::zeros(u.side());
    grad_into(u, &mut out);
    out
}

/// Divergence `-∇ᵀσ` into `out`. Flux stored on the last row (for `vx`) or
/// last column (for `vy`) leaves the domain and is ignored.
pub fn div_into(sigma: &FlowField, out: &mut ScalarField) {
    let p = sigma.side();
    let (vx, vy) = (sigma.vx(), sigma.vy());
    let d = out.as_mut_slice();
    for i in 0..p {
        for j in 0..p {
            let c = i * p + j;
            let mut v = 0.0;
            if i + 1 < p {
                v += vx[c];
            }
            if i > 0 {
                v -= vx[c - p];
            }
            if j + 1 < p {
                v += vy[c];
            }
            if j > 0 {
                v -= vy[c - 1];
            }
            d[c] = v;
        }
    }
}

pub fn div_h(sigma: &FlowField) -> ScalarField {
    let mut out = ScalarField::zeros(sigma.side());
    div_into(sigma, &mut out);
    out
}

/// `Δu = div ∇u`, the five-point stencil with Neumann boundary, into `out`.
pub fn laplacian_into(u: &ScalarField, out: &mut ScalarField) {
    let p = u.side();
    let u = u.as_slice();
    let d = out.as_mut_slice();
    for i in 0..p {
        for j in 0..p {
            let c = i * p + j;
            let mut v = 0.0;
            if i > 0 {
                v += u[c - p] - u[c];
            }
            if i + 1 < p {
                v += u[c + p] - u[c];
            }
            if j > 0 {
                v += u[c - 1] - u[c];
            }
            if j + 1 < p {
                v += u[c + 1] - u[c];
            }
            d[c] = v;
        }
    }
}

pub fn laplacian_h(u: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(u.side());
    laplacian_into(u, &mut out);
    out
}

/// Checks the Poisson compatibility condition and returns the mean-free
/// copy of `rhs`.
pub(crate) fn compatible_rhs(rhs: &ScalarField) -> Result<ScalarField> {
    let mean = rhs.mean();
    if mean.abs() > MEAN_TOL {
        return Err(Error::NonZeroMeanRhs { mean });
    }
    let mut out = rhs.clone();
    out.add_constant(-mean);
    Ok(out)
}
