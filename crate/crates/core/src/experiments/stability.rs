//! Stability probes: perturb every sample and compare the medians.
//!
//! In one dimension the selections are Lipschitz:
//! `W₁(sel(ν), sel(ν̃)) ≤ Σ_i W₁(ν_i, ν̃_i)`, checked exactly. On grids only
//! the trend of median movement against perturbation size is reported.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{random_atomic, random_blob, solve_recorded, SolverSummary};
use crate::dr::DrParams;
use crate::error::{Error, Result};
use crate::geom::grid_w1_bounds;
use crate::grid2d::{GridMeasure, ScalarField};
use crate::median1d::{horizontal_selection, vertical_selection, w1_1d, Measure1D};
use crate::Weights;

/// Relative rounding allowance for the exact inequality.
const EXACT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityTrial1D {
    /// `Σ_i W₁(ν_i, ν̃_i)`.
    pub perturbation: f64,
    pub vertical_movement: f64,
    pub horizontal_movement: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport1D {
    pub scale: f64,
    pub theta: f64,
    pub seed: u64,
    pub trials: Vec<StabilityTrial1D>,
    pub all_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow2D {
    pub scale: f64,
    /// Estimated `W₁` movement of the median, one entry per trial.
    pub movements: Vec<f64>,
    pub mean_movement: f64,
    pub solvers: Vec<SolverSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport2D {
    pub seed: u64,
    pub reference: SolverSummary,
    pub rows: Vec<StabilityRow2D>,
    /// Mean movement is nondecreasing in the perturbation scale.
    pub nondecreasing: bool,
}

/// Random perturbation of size `scale`: a translation by up to `scale`
/// followed by mixing in up to `min(scale, 1)/2` of a random atomic measure
/// near the support. `scale = 0` returns the measure unchanged.
pub fn perturb_1d(rng: &mut impl Rng, sample: &Measure1D, scale: f64) -> Result<Measure1D> {
    if !(scale >= 0.0) {
        return Err(Error::InvalidMeasure(format!("perturbation scale {scale} is negative")));
    }
    if scale == 0.0 {
        return Ok(sample.clone());
    }
    let shifted = sample.translate(scale * rng.gen_range(-1.0..=1.0));
    let (lo, hi) = shifted.support();
    let centre = 0.5 * (lo + hi);
    let noise = random_atomic(rng, 4, 0.5 * (hi - lo) + 1.0)?.translate(centre);
    let t = 0.5 * scale.min(1.0) * rng.gen_range(0.0..=1.0);
    shifted.mixture(&noise, t)
}

/// Mixes `min(scale, 1)` of a random blob into a grid sample.
pub fn perturb_2d(rng: &mut impl Rng, sample: &GridMeasure, scale: f64) -> Result<GridMeasure> {
    if !(scale >= 0.0) {
        return Err(Error::InvalidMeasure(format!("perturbation scale {scale} is negative")));
    }
    if scale == 0.0 {
        return Ok(sample.clone());
    }
    let t = scale.min(1.0);
    let noise = random_blob(rng, sample.side())?;
    let mixed: Vec<f64> = sample
        .as_slice()
        .iter()
        .zip(noise.as_slice())
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();
    GridMeasure::from_density(ScalarField::new(sample.side(), mixed)?)
}

/// Exact one-dimensional probe: over `trials` random perturbations of size
/// `scale`, checks the Lipschitz inequality for the vertical and horizontal
/// selections at `theta`.
pub fn stability_probe_1d(
    samples: &[Measure1D],
    weights: &Weights,
    scale: f64,
    theta: f64,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport1D> {
    weights.require_len(samples.len())?;
    let vertical = vertical_selection(weights, samples, theta)?;
    let horizontal = horizontal_selection(weights, samples, theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let perturbed = samples
            .iter()
            .map(|s| perturb_1d(&mut rng, s, scale))
            .collect::<Result<Vec<_>>>()?;
        let perturbation: f64 = samples.iter().zip(&perturbed).map(|(a, b)| w1_1d(a, b)).sum();
        let vertical_movement = w1_1d(&vertical, &vertical_selection(weights, &perturbed, theta)?);
        let horizontal_movement =
            w1_1d(&horizontal, &horizontal_selection(weights, &perturbed, theta)?);
        let limit = perturbation + EXACT_REL_TOL * perturbation.max(1e-300);
        out.push(StabilityTrial1D {
            perturbation,
            vertical_movement,
            horizontal_movement,
            holds: vertical_movement <= limit && horizontal_movement <= limit,
        });
    }
    let all_hold = out.iter().all(|t| t.holds);
    Ok(StabilityReport1D {
        scale,
        theta,
        seed,
        trials: out,
        all_hold,
    })
}

/// Grid trend probe: for every scale, `trials` perturbed instances are
/// solved and the median movement is estimated in cell units. Trials use
/// independent seeded streams, so rows at different scales reuse the same
/// random blobs.
pub fn stability_trend_2d(
    samples: &[GridMeasure],
    weights: &Weights,
    scales: &[f64],
    trials: usize,
    seed: u64,
    params: &DrParams,
) -> Result<StabilityReport2D> {
    weights.require_len(samples.len())?;
    let reference = solve_recorded(samples, weights, params)?;
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let mut movements = Vec::with_capacity(trials);
        let mut solvers = Vec::with_capacity(trials);
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
            let perturbed = samples
                .iter()
                .map(|s| perturb_2d(&mut rng, s, scale))
                .collect::<Result<Vec<_>>>()?;
            let solution = if scale == 0.0 {
                reference.clone()
            } else {
                solve_recorded(&perturbed, weights, params)?
            };
            movements.push(grid_w1_bounds(&reference.median, &solution.median)?.estimate);
            solvers.push(SolverSummary::from(&solution));
        }
        let mean_movement = movements.iter().sum::<f64>() / trials.max(1) as f64;
        rows.push(StabilityRow2D {
            scale,
            movements,
            mean_movement,
            solvers,
        });
    }
    let mut order: Vec<&StabilityRow2D> = rows.iter().collect();
    order.sort_by(|a, b| a.scale.total_cmp(&b.scale));
    let nondecreasing = order.windows(2).all(|w| w[1].mean_movement >= w[0].mean_movement);
    Ok(StabilityReport2D {
        seed,
        reference: SolverSummary::from(&reference),
        rows,
        nondecreasing,
    })
}
