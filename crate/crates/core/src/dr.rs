//! Douglas–Rachford splitting for the discrete Beckmann median problem
//!
//! ```text
//! min  Σ_q λ_q ‖σ_q‖_{1,2}   over   div σ_q + ν_q = ν,  ν in the simplex.
//! ```
//!
//! The objective splits into a separable part (group shrinkage of each flow
//! with threshold `τ λ_q`, simplex projection of `ν`) and the indicator of
//! the affine constraint set, handled by [`FlowProjector`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid2d::{div_into, grad_h, FlowField, GridMeasure, PoissonBackend, ScalarField, TensorSolver};
use crate::prox::{constraint_residuals, project_simplex_in_place, shrink_in_place, FlowProjector, FlowTuple};
use crate::weights::Weights;

/// Relaxation parameters `θ_k ∈ (0, 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    Constant(f64),
    /// `θ_k` for the listed iterations, then the last entry forever.
    Schedule(Vec<f64>),
}

impl Relaxation {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Self::Constant(t) => *t,
            Self::Schedule(v) => v[k.min(v.len() - 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        let values: &[f64] = match self {
            Self::Constant(t) => std::slice::from_ref(t),
            Self::Schedule(v) if v.is_empty() => {
                return Err(Error::InvalidArgument("empty relaxation schedule".into()))
            }
            Self::Schedule(v) => v,
        };
        // The schedule is eventually constant, so Σ θ_k (2 - θ_k) diverges
        // exactly when the tail value lies in (0, 2).
        let tail = values[values.len() - 1];
        if values.iter().any(|t| !(0.0..2.0).contains(t)) || tail <= 0.0 {
            return Err(Error::InvalidArgument(
                "relaxation parameters must lie in [0, 2) with a positive tail".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrParams {
    /// Step size.
    pub tau: f64,
    pub relaxation: Relaxation,
    /// Stop once `Σ_q ‖Δη_q‖² + ‖Δμ‖² ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative tolerance of the iterative elliptic solves (CG backend).
    pub cg_tol: f64,
    /// `None` starts from `η = 0`, `μ` uniform; `Some(s)` perturbs that
    /// start with a seeded random draw.
    pub seed: Option<u64>,
    pub backend: PoissonBackend,
}

impl Default for DrParams {
    fn default() -> Self {
        Self {
            tau: 0.1,
            relaxation: Relaxation::Constant(1.0),
            tol: 1e-7,
            max_iter: 5000,
            cg_tol: 1e-10,
            seed: None,
            backend: PoissonBackend::Direct,
        }
    }
}

impl DrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.tol >= 0.0) || !(self.cg_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        self.relaxation.validate()
    }
}

/// Douglas–Rachford iterate `(η_1, …, η_N, μ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrState {
    pub eta: Vec<FlowField>,
    pub mu: ScalarField,
    pub iter: usize,
    pub residual_history: Vec<f64>,
}

impl DrState {
    pub fn initial(p: usize, n: usize, seed: Option<u64>) -> Self {
        let mut state = Self {
            eta: vec![FlowField::zeros(p); n],
            mu: GridMeasure::uniform(p).into_field(),
            iter: 0,
            residual_history: Vec::new(),
        };
        if let Some(seed) = seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for f in &mut state.eta {
                let (vx, vy) = f.components_mut();
                vx.iter_mut().chain(vy.iter_mut()).for_each(|v| *v = rng.gen_range(-0.01..0.01));
            }
            let cells = (p * p) as f64;
            for m in state.mu.as_mut_slice() {
                *m = rng.gen_range(0.0..2.0) / cells;
            }
            let total = state.mu.sum();
            state.mu.scale(1.0 / total);
        }
        state
    }
}

/// The prox-of-`g₁` point of one iteration: shrunk flows and the simplex
/// projection of `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub sigma: Vec<FlowField>,
    pub nu: ScalarField,
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub residual: f64,
    pub primal_value: f64,
}

/// Output of [`solve_median`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianSolution {
    pub median: GridMeasure,
    /// Optimal flows, one per sample, satisfying `div σ_q + ν_q = ν`.
    pub flows: Vec<FlowField>,
    /// Transport densities `‖σ_q(c)‖₂`.
    pub densities: Vec<ScalarField>,
    pub primal_value: f64,
    /// Kantorovich-type potentials `u_q`, 1-Lipschitz on the grid graph.
    pub potentials: Vec<ScalarField>,
    /// Lower bound on the optimal value certified by the potentials.
    pub dual_value: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub history: Vec<HistoryEntry>,
}

impl MedianSolution {
    /// `primal_value - dual_value`, an upper bound on the suboptimality.
    pub fn certified_gap(&self) -> f64 {
        (self.primal_value - self.dual_value).max(0.0)
    }
}

/// `Σ_q λ_q Σ_c ‖σ_q(c)‖₂`.
pub fn primal_value(flows: &[FlowField], weights: &Weights) -> f64 {
    flows.iter().zip(weights.iter()).map(|(f, l)| l * f.l12_norm()).sum()
}

/// Reusable solver bound to one set of samples and weights.
pub struct DrSolver<'a> {
    samples: &'a [GridMeasure],
    weights: &'a Weights,
    params: DrParams,
    projector: FlowProjector,
    reflected: FlowTuple,
}

impl<'a> DrSolver<'a> {
    pub fn new(samples: &'a [GridMeasure], weights: &'a Weights, params: DrParams) -> Result<Self> {
        params.validate()?;
        weights.require_len(samples.len())?;
        weights.require_positive()?;
        let p = samples
            .first()
            .ok_or_else(|| Error::InvalidArgument("no samples".into()))?
            .side();
        for s in samples {
            crate::grid2d::check_same_grid(p, s.side())?;
        }
        let projector = FlowProjector::new(p, samples.len(), params.backend, params.cg_tol)?;
        Ok(Self {
            samples,
            weights,
            params,
            projector,
            reflected: FlowTuple::zeros(p, samples.len()),
        })
    }

    pub fn side(&self) -> usize {
        self.projector.side()
    }

    pub fn params(&self) -> &DrParams {
        &self.params
    }

    /// One iteration; updates `state` in place, appends the residual to its
    /// history and returns the `(σ, ν)` point.
    pub fn step(&mut self, state: &mut DrState) -> Result<Snapshot> {
        let tau = self.params.tau;
        let theta = self.params.relaxation.at(state.iter);
        let sigma: Vec<FlowField> = state
            .eta
            .iter()
            .zip(self.weights.iter())
            .map(|(eta, l)| {
                let mut s = eta.clone();
                shrink_in_place(&mut s, tau * l);
                s
            })
            .collect();
        let mut nu = state.mu.clone();
        project_simplex_in_place(&mut nu);

        // Reflect through the prox point and project onto the constraints.
        for ((r, s), eta) in self.reflected.flows.iter_mut().zip(&sigma).zip(&state.eta) {
            r.clone_from(s);
            r.scale(2.0);
            r.axpy(-1.0, eta);
        }
        self.reflected.measure.clone_from(&nu);
        self.reflected.measure.scale(2.0);
        self.reflected.measure.axpy(-1.0, &state.mu);
        self.projector.project_in_place(&mut self.reflected, self.samples)?;

        let mut residual = 0.0;
        for ((eta, s), r) in state.eta.iter_mut().zip(&sigma).zip(&self.reflected.flows) {
            let mut delta = r.sub(s);
            delta.scale(theta);
            residual += delta.dot(&delta);
            eta.axpy(1.0, &delta);
        }
        let mut delta = self.reflected.measure.sub(&nu);
        delta.scale(theta);
        residual += delta.dot(&delta);
        state.mu.axpy(1.0, &delta);

        state.iter += 1;
        state.residual_history.push(residual);
        Ok(Snapshot { sigma, nu })
    }

    /// Iterates from `state` until the residual drops below `tol` or the
    /// iteration cap is reached. `observe` sees every history entry.
    pub fn run(
        &mut self,
        state: &mut DrState,
        mut observe: impl FnMut(&HistoryEntry),
    ) -> Result<MedianSolution> {
        let mut history = Vec::new();
        let mut last = None;
        let mut residual = f64::INFINITY;
        while state.iter < self.params.max_iter {
            let snap = self.step(state)?;
            residual = *state.residual_history.last().expect("step records");
            let entry = HistoryEntry {
                iter: state.iter,
                residual,
                primal_value: primal_value(&snap.sigma, self.weights),
            };
            observe(&entry);
            history.push(entry);
            last = Some(snap);
            if residual <= self.params.tol {
                break;
            }
        }
        let snap = match last {
            Some(s) => s,
            None => self.step(state)?,
        };
        let converged = residual <= self.params.tol;
        let solution = self.finish(state, snap, history, residual, converged)?;
        if converged {
            Ok(solution)
        } else {
            Err(Error::MedianNoConvergence(Box::new(solution)))
        }
    }

    /// Packages the final snapshot: the flows are corrected to satisfy the
    /// constraints exactly for the reported median, and potentials are
    /// recovered from the dual part of the iterate.
    fn finish(
        &mut self,
        state: &DrState,
        snap: Snapshot,
        history: Vec<HistoryEntry>,
        final_residual: f64,
        converged: bool,
    ) -> Result<MedianSolution> {
        let p = self.side();
        let median = GridMeasure::new(snap.nu.clone())?;
        let poisson = TensorSolver::poisson(p)?;

        // Minimal-norm correction of each flow onto div σ_q = ν - ν_q.
        let mut flows = snap.sigma.clone();
        let mut d = ScalarField::zeros(p);
        for (sigma, nu_q) in flows.iter_mut().zip(self.samples) {
            div_into(sigma, &mut d);
            for ((di, a), b) in d.as_mut_slice().iter_mut().zip(nu_q.as_slice()).zip(median.as_slice()) {
                *di += a - b;
            }
            let w = poisson.solve(&d)?;
            sigma.axpy(1.0, &grad_h(&w));
        }
        let densities = flows.iter().map(FlowField::magnitudes).collect();
        let primal = primal_value(&flows, self.weights);

        // (η_q - σ_q) / (τ λ_q) approximates a gradient ∇w_q aligned with
        // σ_q; u_q = -w_q is then a potential for the sample's transport.
        let mut potentials = Vec::with_capacity(flows.len());
        for ((eta, sigma), l) in state.eta.iter().zip(&snap.sigma).zip(self.weights.iter()) {
            let mut g = eta.sub(sigma);
            g.scale(1.0 / (self.params.tau * l));
            div_into(&g, &mut d);
            let mut u = poisson.solve(&d)?;
            let lip = grad_h(&u).magnitudes().max();
            if lip > 1.0 {
                u.scale(1.0 / lip);
            }
            potentials.push(u);
        }
        let dual = dual_bound(&potentials, self.samples, self.weights);
        Ok(MedianSolution {
            median,
            flows,
            densities,
            primal_value: primal,
            potentials,
            dual_value: dual,
            iterations: state.iter,
            final_residual,
            converged,
            history,
        })
    }
}

/// Lower bound `min_c Σ_q λ_q u_q(c) - Σ_q λ_q ⟨u_q, ν_q⟩` on the median
/// problem, valid whenever every `u_q` is 1-Lipschitz on the grid graph
/// (cell-wise `‖∇u_q‖₂ ≤ 1`).
pub fn dual_bound(potentials: &[ScalarField], samples: &[GridMeasure], weights: &Weights) -> f64 {
    let p = samples[0].side();
    let mut combined = ScalarField::zeros(p);
    let mut linear = 0.0;
    for ((u, nu), l) in potentials.iter().zip(samples).zip(weights.iter()) {
        combined.axpy(l, u);
        linear += l * u.dot(nu.field());
    }
    combined.min() - linear
}

/// Runs Douglas–Rachford from the default start. On hitting the iteration
/// cap the error carries the partial solution.
pub fn solve_median(samples: &[GridMeasure], weights: &Weights, params: &DrParams) -> Result<MedianSolution> {
    solve_median_with(samples, weights, params, |_| {})
}

/// [`solve_median`] with a per-iteration observer.
pub fn solve_median_with(
    samples: &[GridMeasure],
    weights: &Weights,
    params: &DrParams,
    observe: impl FnMut(&HistoryEntry),
) -> Result<MedianSolution> {
    let mut solver = DrSolver::new(samples, weights, params.clone())?;
    let mut state = DrState::initial(solver.side(), samples.len(), params.seed);
    solver.run(&mut state, observe)
}

/// One iteration from `state` (convenience form that builds the solver).
pub fn dr_step(
    state: &DrState,
    samples: &[GridMeasure],
    weights: &Weights,
    params: &DrParams,
) -> Result<(DrState, Snapshot)> {
    let mut solver = DrSolver::new(samples, weights, params.clone())?;
    let mut next = state.clone();
    let snap = solver.step(&mut next)?;
    Ok((next, snap))
}

/// Optimality diagnostics for a computed median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MkReport {
    /// `‖div σ_q + ν_q - ν‖₂` per sample.
    pub constraint_residuals: Vec<f64>,
    /// Per sample, the share of transport density sitting on cells where the
    /// potential's gradient norm differs from one by more than 5%.
    pub misaligned_fraction: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `primal - dual`; nonnegative up to rounding, zero at optimality.
    pub gap: f64,
}

/// Residuals of the Monge–Kantorovich optimality system at `solution`.
pub fn mk_residuals(
    solution: &MedianSolution,
    samples: &[GridMeasure],
    weights: &Weights,
) -> Result<MkReport> {
    weights.require_len(samples.len())?;
    if solution.flows.len() != samples.len() {
        return Err(Error::InvalidArgument("solution and samples differ in count".into()));
    }
    let constraint = constraint_residuals(&solution.flows, samples, solution.median.field());
    let misaligned = solution
        .flows
        .iter()
        .zip(&solution.potentials)
        .map(|(flow, u)| {
            let rho = flow.magnitudes();
            let total = rho.sum();
            if total <= 0.0 {
                return 0.0;
            }
            let slope = grad_h(u).magnitudes();
            let off: f64 = rho
                .as_slice()
                .iter()
                .zip(slope.as_slice())
                .filter(|(_, g)| (**g - 1.0).abs() > 0.05)
                .map(|(r, _)| r)
                .sum();
            off / total
        })
        .collect();
    let primal = primal_value(&solution.flows, weights);
    let dual = dual_bound(&solution.potentials, samples, weights);
    Ok(MkReport {
        constraint_residuals: constraint,
        misaligned_fraction: misaligned,
        primal_value: primal,
        dual_value: dual,
        gap: primal - dual,
    })
}
