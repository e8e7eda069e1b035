//! Reproducible experiment harnesses: breakdown sweeps, stability probes and
//! the quadrilateral counterexample, plus the seeded instance generators
//! they run on.

mod breakdown;
mod quadrilateral;
mod stability;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dr::{solve_median, DrParams, MedianSolution};
use crate::error::{Error, Result};
use crate::grid2d::{GridMeasure, ScalarField};
use crate::median1d::Measure1D;
use crate::Weights;

pub use breakdown::{
    breakdown_sweep_1d, breakdown_sweep_2d, BreakdownReport, BreakdownRow, Regime,
};
pub use quadrilateral::{
    quadrilateral_counterexample, quadrilateral_samples, quadrilateral_trend,
    QuadrilateralInstance, QuadrilateralReport, QuadrilateralTrend,
};
pub use stability::{
    perturb_1d, perturb_2d, stability_probe_1d, stability_trend_2d, StabilityReport1D,
    StabilityReport2D, StabilityRow2D, StabilityTrial1D,
};

/// Name, generator parameters, solver parameters and seed of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    /// Free-form generator parameters, recorded verbatim in reports.
    pub parameters: serde_json::Value,
    pub solver: Option<DrParams>,
    pub seed: u64,
}

impl ExperimentSpec {
    /// The generator stream for this run. Equal seeds give equal streams.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Solver outcome as recorded in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub primal_value: f64,
    pub dual_value: f64,
}

impl From<&MedianSolution> for SolverSummary {
    fn from(s: &MedianSolution) -> Self {
        Self {
            iterations: s.iterations,
            final_residual: s.final_residual,
            converged: s.converged,
            primal_value: s.primal_value,
            dual_value: s.dual_value,
        }
    }
}

/// Runs the grid solver, keeping the last iterate when the iteration cap is
/// hit. Non-convergence is recorded in the solution, other errors propagate.
pub fn solve_recorded(
    samples: &[GridMeasure],
    weights: &Weights,
    params: &DrParams,
) -> Result<MedianSolution> {
    match solve_median(samples, weights, params) {
        Ok(s) => Ok(s),
        Err(Error::MedianNoConvergence(s)) => Ok(*s),
        Err(e) => Err(e),
    }
}

/// Atomic measure with `atoms` atoms at uniform positions in `[-span, span]`
/// and uniform random masses.
pub fn random_atomic(rng: &mut impl Rng, atoms: usize, span: f64) -> Result<Measure1D> {
    let positions: Vec<f64> = (0..atoms).map(|_| rng.gen_range(-span..=span)).collect();
    let masses: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.05..1.0)).collect();
    Measure1D::from_atoms(&positions, &masses)
}

/// Histogram on the bins of `edges` with random masses; roughly a quarter
/// of the bins are left empty.
pub fn random_histogram(rng: &mut impl Rng, edges: &[f64]) -> Result<Measure1D> {
    let bins = edges.len().saturating_sub(1);
    let mut masses: Vec<f64> = (0..bins)
        .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    if masses.iter().all(|m| *m == 0.0) && bins > 0 {
        masses[rng.gen_range(0..bins)] = 1.0;
    }
    Measure1D::from_uniform_bins(edges, &masses)
}

/// `n + 1` equally spaced edges over `[lo, hi]`.
pub fn uniform_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

/// Cone-shaped bump `(r - |x - c|)₊` on a `p × p` grid, normalized. The
/// centre is given in cell coordinates.
pub fn blob(p: usize, centre: [f64; 2], radius: f64) -> Result<GridMeasure> {
    GridMeasure::from_density(ScalarField::from_fn(p, |i, j| {
        let d = (i as f64 - centre[0]).hypot(j as f64 - centre[1]);
        (radius - d).max(0.0)
    }))
}

/// Blob with random centre and radius in `[2, p/6]`, kept inside the grid.
pub fn random_blob(rng: &mut impl Rng, p: usize) -> Result<GridMeasure> {
    let r_max = (p as f64 / 6.0).max(2.5);
    let r = rng.gen_range(2.0..r_max);
    let lo = r.min(p as f64 / 2.0);
    let hi = (p as f64 - 1.0 - r).max(lo + 1e-9);
    let c = [rng.gen_range(lo..hi), rng.gen_range(lo..hi)];
    blob(p, c, r)
}

/// `n` blobs clustered around the point `(p/4, p/4)`, leaving most of the
/// grid free for displacement sweeps.
pub fn clustered_blobs(rng: &mut impl Rng, p: usize, n: usize) -> Result<Vec<GridMeasure>> {
    let q = p as f64;
    (0..n)
        .map(|_| {
            let c = [
                q / 4.0 + rng.gen_range(-q / 16.0..=q / 16.0),
                q / 4.0 + rng.gen_range(-q / 16.0..=q / 16.0),
            ];
            blob(p, c, rng.gen_range((q / 16.0).max(1.5)..=(q / 10.0).max(2.0)))
        })
        .collect()
}

/// Uniform measure on the axis-aligned rectangle `[x0, x1] × [y0, y1]`
/// rasterized on the grid covering `[-half, half]²`; each cell receives the
/// exact area of its overlap with the rectangle.
pub fn rectangle(p: usize, half: f64, rect: [f64; 4]) -> Result<GridMeasure> {
    let h = 2.0 * half / p as f64;
    let overlap = |a0: f64, a1: f64, b0: f64, b1: f64| (a1.min(b1) - a0.max(b0)).max(0.0);
    GridMeasure::from_density(ScalarField::from_fn(p, |i, j| {
        let x0 = -half + i as f64 * h;
        let y0 = -half + j as f64 * h;
        overlap(x0, x0 + h, rect[0], rect[1]) * overlap(y0, y0 + h, rect[2], rect[3])
    }))
}

/// Mean position of a grid measure in cell coordinates.
pub fn grid_mean(m: &GridMeasure) -> [f64; 2] {
    m.weighted_cells().fold([0.0, 0.0], |acc, (x, w)| [acc[0] + w * x[0], acc[1] + w * x[1]])
}
