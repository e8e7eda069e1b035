//! Matrix-free preconditioned conjugate gradients for the two elliptic
//! systems of the flow projection.

use super::{compatible_rhs, laplacian_into, ScalarField};
use crate::error::{Error, Result};

/// Number of grid neighbours of each cell, the diagonal of `-Δ`.
fn neighbour_counts(p: usize) -> Vec<f64> {
    let edge = |k: usize| if k == 0 || k + 1 == p { 1.0 } else { 2.0 };
    (0..p * p).map(|c| edge(c / p) + edge(c % p)).collect()
}

/// Jacobi-preconditioned CG for `(α I - β Δ) x = b`, started from `x`.
/// `project` keeps iterates in the mean-free subspace when the operator is
/// singular.
fn pcg(
    alpha: f64,
    beta: f64,
    b: &ScalarField,
    x: &mut ScalarField,
    tol: f64,
    max_iter: usize,
    project: bool,
    solver: &'static str,
) -> Result<usize> {
    let p = b.side();
    let diag: Vec<f64> = neighbour_counts(p).iter().map(|d| alpha + beta * d).collect();
    let apply = |v: &ScalarField, out: &mut ScalarField| {
        laplacian_into(v, out);
        for (o, vi) in out.as_mut_slice().iter_mut().zip(v.as_slice()) {
            *o = alpha * vi - beta * *o;
        }
    };
    let target = tol * b.norm();
    let mut r = ScalarField::zeros(p);
    let mut ap = ScalarField::zeros(p);
    let mut z = ScalarField::zeros(p);
    let mut dir = ScalarField::zeros(p);
    let mut iterations = 0;
    // Outer loop restarts from the true residual whenever the recursive one
    // claims convergence that the true one does not confirm.
    loop {
        apply(x, &mut r);
        for (ri, bi) in r.as_mut_slice().iter_mut().zip(b.as_slice()) {
            *ri = bi - *ri;
        }
        if project {
            let m = r.mean();
            r.add_constant(-m);
        }
        let mut rnorm = r.norm();
        if rnorm <= target {
            return Ok(iterations);
        }
        if iterations >= max_iter {
            return Err(Error::NoConvergence {
                solver,
                iterations,
                residual: rnorm / b.norm().max(f64::MIN_POSITIVE),
            });
        }
        let precondition = |r: &ScalarField, z: &mut ScalarField| {
            for ((zi, ri), d) in z.as_mut_slice().iter_mut().zip(r.as_slice()).zip(&diag) {
                *zi = ri / d;
            }
        };
        precondition(&r, &mut z);
        dir.as_mut_slice().copy_from_slice(z.as_slice());
        let mut rz = r.dot(&z);
        while iterations < max_iter && rnorm > target {
            apply(&dir, &mut ap);
            let step = rz / dir.dot(&ap);
            x.axpy(step, &dir);
            r.axpy(-step, &ap);
            iterations += 1;
            rnorm = r.norm();
            precondition(&r, &mut z);
            let rz_next = r.dot(&z);
            let momentum = rz_next / rz;
            rz = rz_next;
            for (d, zi) in dir.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *d = zi + momentum * *d;
            }
        }
        if project {
            let m = x.mean();
            x.add_constant(-m);
        }
    }
}

/// Solves `-Δ ξ = rhs` with Neumann boundary, returning the mean-zero
/// solution with `‖-Δξ - rhs‖ ≤ tol ‖rhs‖`.
///
/// A right-hand side whose mean exceeds [`super::MEAN_TOL`] is outside the
/// range of the Laplacian and is rejected; smaller means are projected out.
pub fn solve_neumann_poisson(rhs: &ScalarField, tol: f64, max_iter: usize) -> Result<ScalarField> {
    let mut x = ScalarField::zeros(rhs.side());
    solve_neumann_poisson_from(rhs, &mut x, tol, max_iter)?;
    Ok(x)
}

/// Warm-started variant of [`solve_neumann_poisson`]; `x` holds the initial
/// guess and receives the solution. Returns the iteration count.
pub fn solve_neumann_poisson_from(
    rhs: &ScalarField,
    x: &mut ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    super::check_same_grid(rhs.side(), x.side())?;
    let b = compatible_rhs(rhs)?;
    let m = x.mean();
    x.add_constant(-m);
    pcg(0.0, 1.0, &b, x, tol, max_iter, true, "poisson CG")
}

/// Solves `(I - Δ/n) z = rhs` to relative residual `tol`.
pub fn solve_shifted(rhs: &ScalarField, n: usize, tol: f64, max_iter: usize) -> Result<ScalarField> {
    let mut x = ScalarField::zeros(rhs.side());
    solve_shifted_from(rhs, n, &mut x, tol, max_iter)?;
    Ok(x)
}

/// Warm-started variant of [`solve_shifted`].
pub fn solve_shifted_from(
    rhs: &ScalarField,
    n: usize,
    x: &mut ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidArgument("shifted solve needs n ≥ 1".into()));
    }
    super::check_same_grid(rhs.side(), x.side())?;
    pcg(1.0, 1.0 / n as f64, rhs, x, tol, max_iter, false, "shifted CG")
}
