//! Proximal maps and projections used by the Douglas–Rachford median
//! solver: per-cell group shrinkage, Euclidean projection onto the
//! probability simplex, and projection onto the affine set of flow tuples
//! satisfying `div σ_i + ν_i = ν` for every sample.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid2d::{
    check_same_grid, div_into, grad_into, solve_neumann_poisson_from, solve_shifted_from,
    FlowField, GridMeasure, PoissonBackend, ScalarField, TensorSolver,
};

/// Largest deviation of a sample's mass from one accepted by the projection.
pub const SAMPLE_MASS_TOL: f64 = 1e-9;

/// Per-cell vector shrinkage, the prox of `τ Σ_c ‖σ(c)‖₂`: each vector `v`
/// becomes `v · max(0, 1 - τ/‖v‖)`, and zero stays zero.
pub fn shrink_group(sigma: &FlowField, tau: f64) -> FlowField {
    let mut out = sigma.clone();
    shrink_in_place(&mut out, tau);
    out
}

pub fn shrink_in_place(sigma: &mut FlowField, tau: f64) {
    let (vx, vy) = sigma.components_mut();
    for (x, y) in vx.iter_mut().zip(vy.iter_mut()) {
        let norm = x.hypot(*y);
        let factor = if norm > tau { 1.0 - tau / norm } else { 0.0 };
        *x *= factor;
        *y *= factor;
    }
}

/// Euclidean projection onto `{w ≥ 0, Σ w = 1}` by sorting and
/// thresholding.
pub fn project_simplex(v: &ScalarField) -> GridMeasure {
    let mut out = v.clone();
    project_simplex_in_place(&mut out);
    GridMeasure::new(out).expect("simplex projection yields a probability")
}

/// In-place [`project_simplex`]; the caller gets the raw field back.
pub fn project_simplex_in_place(v: &mut ScalarField) {
    let mut sorted = v.as_slice().to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut threshold = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (k + 1) as f64;
        if k + 1 == sorted.len() || sorted[k + 1] <= t {
            threshold = t;
            break;
        }
    }
    let data = v.as_mut_slice();
    for x in data.iter_mut() {
        *x = (*x - threshold).max(0.0);
    }
    let total: f64 = data.iter().sum();
    if total > 0.0 {
        data.iter_mut().for_each(|x| *x /= total);
    }
}

/// `N` flows together with the candidate median slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTuple {
    pub flows: Vec<FlowField>,
    pub measure: ScalarField,
}

impl FlowTuple {
    pub fn zeros(p: usize, n: usize) -> Self {
        Self {
            flows: vec![FlowField::zeros(p); n],
            measure: ScalarField::zeros(p),
        }
    }

    pub fn side(&self) -> usize {
        self.measure.side()
    }

    /// Squared Euclidean distance between tuples.
    pub fn distance_sq(&self, other: &Self) -> f64 {
        let flows: f64 = self
            .flows
            .iter()
            .zip(&other.flows)
            .map(|(a, b)| a.sub(b).dot(&a.sub(b)))
            .sum();
        let m = self.measure.sub(&other.measure);
        flows + m.dot(&m)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let flows: f64 = self.flows.iter().zip(&other.flows).map(|(a, b)| a.dot(b)).sum();
        flows + self.measure.dot(&other.measure)
    }
}

/// `‖div σ_i + ν_i - ν‖₂` for each sample.
pub fn constraint_residuals(
    flows: &[FlowField],
    samples: &[GridMeasure],
    measure: &ScalarField,
) -> Vec<f64> {
    let mut d = ScalarField::zeros(measure.side());
    flows
        .iter()
        .zip(samples)
        .map(|(s, nu)| {
            div_into(s, &mut d);
            d.as_slice()
                .iter()
                .zip(nu.as_slice())
                .zip(measure.as_slice())
                .map(|((a, b), c)| (a + b - c).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

enum Backend {
    Direct {
        poisson: TensorSolver,
        shifted: TensorSolver,
    },
    Cg {
        tol: f64,
        max_iter: usize,
        warm_poisson: Vec<ScalarField>,
        warm_shifted: ScalarField,
    },
}

/// Projection onto `F = {(σ_1, …, σ_N, ν) : div σ_i + ν_i = ν}`, reusable
/// across calls on one grid.
///
/// The constant part of the projection moves `ν` to unit mass; the rest is
/// `σ_i + ∇ξ_i`, `ν + Σ ξ_i` with `ξ_i = ξ'_i - (I - Δ/N)⁻¹ mean_j ξ'_j` and
/// `-Δ ξ'_i = div σ_i + ν_i - ν`.
pub struct FlowProjector {
    p: usize,
    n: usize,
    backend: Backend,
}

impl FlowProjector {
    pub fn new(p: usize, n: usize, backend: PoissonBackend, tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        let backend = match backend {
            PoissonBackend::Direct => {
                let poisson = TensorSolver::poisson(p)?;
                let shifted = poisson.shifted_like(n)?;
                Backend::Direct { poisson, shifted }
            }
            PoissonBackend::ConjugateGradient { max_iter } => Backend::Cg {
                tol,
                max_iter,
                warm_poisson: vec![ScalarField::zeros(p); n],
                warm_shifted: ScalarField::zeros(p),
            },
        };
        Ok(Self { p, n, backend })
    }

    pub fn side(&self) -> usize {
        self.p
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    fn check(&self, input: &FlowTuple, samples: &[GridMeasure]) -> Result<()> {
        if input.flows.len() != self.n || samples.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "projector built for {} samples, got {} flows and {} samples",
                self.n,
                input.flows.len(),
                samples.len()
            )));
        }
        check_same_grid(self.p, input.measure.side())?;
        for f in &input.flows {
            check_same_grid(self.p, f.side())?;
        }
        for s in samples {
            check_same_grid(self.p, s.side())?;
            let discrepancy = (s.field().sum() - 1.0).abs();
            if discrepancy > SAMPLE_MASS_TOL {
                return Err(Error::InfeasibleMass { discrepancy });
            }
        }
        Ok(())
    }

    /// Projects `input` onto the constraint set.
    pub fn project(&mut self, input: &FlowTuple, samples: &[GridMeasure]) -> Result<FlowTuple> {
        let mut out = input.clone();
        self.project_in_place(&mut out, samples)?;
        Ok(out)
    }

    pub fn project_in_place(&mut self, x: &mut FlowTuple, samples: &[GridMeasure]) -> Result<()> {
        self.check(x, samples)?;
        let p = self.p;
        let cells = (p * p) as f64;
        // Constant component: ν moves to unit mass.
        let shift = (1.0 - x.measure.sum()) / cells;
        x.measure.add_constant(shift);

        let rhs: Vec<ScalarField> = x
            .flows
            .par_iter()
            .zip(samples)
            .map(|(sigma, nu)| {
                let mut r = ScalarField::zeros(p);
                div_into(sigma, &mut r);
                for ((ri, a), b) in r.as_mut_slice().iter_mut().zip(nu.as_slice()).zip(x.measure.as_slice()) {
                    *ri += a - b;
                }
                let m = r.mean();
                r.add_constant(-m);
                r
            })
            .collect();

        let xi = match &mut self.backend {
            Backend::Direct { poisson, shifted } => {
                let mut hats: Vec<Vec<f64>> = rhs
                    .par_iter()
                    .map(|r| {
                        let mut hat = vec![0.0; p * p];
                        poisson.to_modes(r.as_slice(), &mut hat);
                        poisson.solve_modes(&mut hat);
                        hat
                    })
                    .collect();
                let mut mean = vec![0.0; p * p];
                for h in &hats {
                    for (m, v) in mean.iter_mut().zip(h) {
                        *m += v;
                    }
                }
                let inv_n = 1.0 / self.n as f64;
                mean.iter_mut().for_each(|m| *m *= inv_n);
                shifted.solve_modes(&mut mean);
                hats.par_iter_mut()
                    .map(|h| {
                        for (v, m) in h.iter_mut().zip(&mean) {
                            *v -= m;
                        }
                        let mut xi = ScalarField::zeros(p);
                        poisson.from_modes(h, xi.as_mut_slice());
                        xi
                    })
                    .collect::<Vec<_>>()
            }
            Backend::Cg {
                tol,
                max_iter,
                warm_poisson,
                warm_shifted,
            } => {
                let (tol, max_iter) = (*tol, *max_iter);
                warm_poisson
                    .par_iter_mut()
                    .zip(&rhs)
                    .map(|(x, r)| solve_neumann_poisson_from(r, x, tol, max_iter).map(|_| ()))
                    .collect::<Result<Vec<()>>>()?;
                let mut mean = ScalarField::zeros(p);
                for x in warm_poisson.iter() {
                    mean.axpy(1.0 / self.n as f64, x);
                }
                solve_shifted_from(&mean, self.n, warm_shifted, tol, max_iter)?;
                warm_poisson
                    .iter()
                    .map(|x| x.sub(warm_shifted))
                    .collect()
            }
        };

        let mut grad = FlowField::zeros(p);
        for (sigma, xi) in x.flows.iter_mut().zip(&xi) {
            grad_into(xi, &mut grad);
            sigma.axpy(1.0, &grad);
            x.measure.axpy(1.0, xi);
        }
        Ok(())
    }
}

/// One-shot projection onto the flow constraints with the CG backend and
/// relative solver tolerance `tol`.
pub fn project_flows(input: &FlowTuple, samples: &[GridMeasure], tol: f64) -> Result<FlowTuple> {
    let mut projector = FlowProjector::new(
        input.side(),
        input.flows.len(),
        PoissonBackend::ConjugateGradient { max_iter: 100_000 },
        tol,
    )?;
    projector.project(input, samples)
}
