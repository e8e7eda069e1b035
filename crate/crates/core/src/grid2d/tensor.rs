//! Direct solver for the separable operators `α I - Δ` on the grid.
//!
//! The Neumann Laplacian is a Kronecker sum `-Δ = T ⊗ I + I ⊗ T` of the 1D
//! operator `T = tridiag(-1, [1, 2, …, 2, 1], -1)`. Diagonalizing `T = V Λ Vᵀ`
//! once turns a solve into one dense transform along the first axis, `p`
//! independent tridiagonal solves along the second, and the inverse
//! transform (the fast diagonalization method). The cost per solve is two
//! `p × p` matrix products, and the results are exact up to rounding, which
//! is what keeps the flow projection feasible to 1e-12 in the median solver.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{check_same_grid, compatible_rhs, ScalarField};
use crate::error::{Error, Result};

/// Factored tridiagonal solve of `(c I + T) x = b` on one mode. When
/// `c = 0` the system is singular; it is solved with `x_0 = 0` and shifted
/// to mean zero afterwards.
#[derive(Debug, Clone)]
struct ModeFactor {
    start: usize,
    inv: Vec<f64>,
    singular: bool,
}

impl ModeFactor {
    fn new(p: usize, c: f64, singular: bool) -> Self {
        let start = usize::from(singular);
        let diag = |j: usize| c + if j == 0 || j + 1 == p { 1.0 } else { 2.0 };
        let mut inv = vec![0.0; p];
        let mut prev = 0.0;
        for j in start..p {
            let m = diag(j) - if j > start { prev } else { 0.0 };
            inv[j] = 1.0 / m;
            prev = inv[j];
        }
        Self { start, inv, singular }
    }

    /// In-place solve on the strided slice `x[offset + j * stride]`.
    fn solve(&self, x: &mut [f64], offset: usize, stride: usize, p: usize) {
        let at = |j: usize| offset + j * stride;
        let s = self.start;
        let mut dp = 0.0;
        for j in s..p {
            dp = (x[at(j)] + if j > s { dp } else { 0.0 }) * self.inv[j];
            x[at(j)] = dp;
        }
        for j in (s..p.saturating_sub(1)).rev() {
            x[at(j)] += self.inv[j] * x[at(j + 1)];
        }
        if self.singular {
            x[at(0)] = 0.0;
            let mean = (0..p).map(|j| x[at(j)]).sum::<f64>() / p as f64;
            for j in 0..p {
                x[at(j)] -= mean;
            }
        }
    }
}

/// `c = a · b` for row-major `p × p` matrices, with `a` optionally read
/// transposed.
fn matmul(p: usize, a: &[f64], a_transposed: bool, b: &[f64], c: &mut [f64]) {
    assert!(a.len() == p * p && b.len() == p * p && c.len() == p * p);
    let (rsa, csa) = if a_transposed { (1, p as isize) } else { (p as isize, 1) };
    // SAFETY: all three buffers hold p*p elements and the strides describe
    // p × p row-major (or transposed) layouts inside them.
    unsafe {
        matrixmultiply::dgemm(
            p,
            p,
            p,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            p as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            p as isize,
            1,
        );
    }
}

/// Direct solver for `(α I - Δ) x = b`; `α = 0` gives the Neumann Poisson
/// problem with mean-zero gauge.
#[derive(Debug, Clone)]
pub struct TensorSolver {
    p: usize,
    alpha: f64,
    scale: f64,
    /// Eigenvectors of `T`, row-major, one eigenvector per column.
    v: Vec<f64>,
    eigenvalues: Vec<f64>,
    zero_mode: usize,
    modes: Vec<ModeFactor>,
}

impl TensorSolver {
    fn build(p: usize, alpha: f64, scale: f64) -> Result<Self> {
        super::Grid::new(p)?;
        let t = DMatrix::from_fn(p, p, |a, b| {
            if a == b {
                if a == 0 || a + 1 == p {
                    1.0
                } else {
                    2.0
                }
            } else if a.abs_diff(b) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let eig: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::new(t);
        let zero_mode = (0..p)
            .min_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()))
            .expect("p ≥ 2");
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let mut v = vec![0.0; p * p];
        for a in 0..p {
            for k in 0..p {
                v[a * p + k] = eig.eigenvectors[(a, k)];
            }
        }
        let mut out = Self {
            p,
            alpha: 0.0,
            scale: 1.0,
            v,
            eigenvalues,
            zero_mode,
            modes: Vec::new(),
        };
        out.set_shift(alpha, scale);
        Ok(out)
    }

    fn set_shift(&mut self, alpha: f64, scale: f64) {
        self.alpha = alpha;
        self.scale = scale;
        self.modes = (0..self.p)
            .map(|k| {
                let singular = alpha == 0.0 && k == self.zero_mode;
                let c = if singular { 0.0 } else { alpha + self.eigenvalues[k] };
                ModeFactor::new(self.p, c, singular)
            })
            .collect();
    }

    /// The shifted solver for `(I - Δ/n)` in the same eigenbasis, so mode
    /// data can be passed between the two without transforming back.
    pub fn shifted_like(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("shifted solve needs n ≥ 1".into()));
        }
        let mut out = self.clone();
        out.set_shift(n as f64, n as f64);
        Ok(out)
    }

    /// Solver for `-Δ ξ = b` with mean-zero solutions.
    pub fn poisson(p: usize) -> Result<Self> {
        Self::build(p, 0.0, 1.0)
    }

    /// Solver for `(I - Δ/n) z = b`.
    pub fn shifted(p: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("shifted solve needs n ≥ 1".into()));
        }
        // (I - Δ/n) z = b  ⇔  (n I - Δ) z = n b
        Self::build(p, n as f64, n as f64)
    }

    pub fn side(&self) -> usize {
        self.p
    }

    /// Whether this is the singular (pure Poisson) operator.
    pub fn is_singular(&self) -> bool {
        self.alpha == 0.0
    }

    /// Transforms along the first axis into the eigenbasis: `hat = Vᵀ x`.
    pub(crate) fn to_modes(&self, x: &[f64], hat: &mut [f64]) {
        matmul(self.p, &self.v, true, x, hat);
    }

    /// Inverse of [`Self::to_modes`]: `x = V hat`.
    pub(crate) fn from_modes(&self, hat: &[f64], x: &mut [f64]) {
        matmul(self.p, &self.v, false, hat, x);
    }

    /// Applies the operator inverse to data already in mode space.
    pub(crate) fn solve_modes(&self, hat: &mut [f64]) {
        let p = self.p;
        if self.scale != 1.0 {
            hat.iter_mut().for_each(|v| *v *= self.scale);
        }
        for (k, mode) in self.modes.iter().enumerate() {
            mode.solve(&mut hat[k * p..(k + 1) * p], 0, 1, p);
        }
    }

    pub fn solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        check_same_grid(self.p, rhs.side())?;
        let b = if self.is_singular() {
            compatible_rhs(rhs)?
        } else {
            rhs.clone()
        };
        let mut hat = vec![0.0; self.p * self.p];
        self.to_modes(b.as_slice(), &mut hat);
        self.solve_modes(&mut hat);
        let mut out = ScalarField::zeros(self.p);
        self.from_modes(&hat, out.as_mut_slice());
        if self.is_singular() {
            let m = out.mean();
            out.add_constant(-m);
        }
        Ok(out)
    }

    /// Solves for several right-hand sides.
    pub fn solve_many(&self, rhs: &[ScalarField]) -> Result<Vec<ScalarField>> {
        rhs.iter().map(|r| self.solve(r)).collect()
    }
}
