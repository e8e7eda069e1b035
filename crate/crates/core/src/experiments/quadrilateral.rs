//! Four thin rectangles arranged around the origin, like the arms of a
//! cross. Their median concentrates on the small central square, so its
//! density is of order `1/ε²` while every sample density is of order
//! `1/(ℓε)`: no upper density bound in terms of the samples holds uniformly
//! in `ε`.

use serde::{Deserialize, Serialize};

use super::{rectangle, solve_recorded, SolverSummary};
use crate::dr::{DrParams, MedianSolution};
use crate::error::{Error, Result};
use crate::grid2d::GridMeasure;
use crate::Weights;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrilateralInstance {
    pub samples: Vec<GridMeasure>,
    pub epsilon: f64,
    pub ell: f64,
    /// Cell width in physical units.
    pub h: f64,
    /// The grid covers `[-half_width, half_width]²`.
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrilateralReport {
    pub epsilon: f64,
    pub ell: f64,
    pub p: usize,
    pub h: f64,
    /// Median mass in cells whose centre lies in `[-ε/2 - h, ε/2 + h]²`.
    pub central_mass_fraction: f64,
    /// Lower bound on the median's largest density: its mass in the
    /// dilated central square divided by the square's area. Medians of this
    /// instance are not unique, so the peak cell of one particular median
    /// can sit anywhere above this bound.
    pub median_linf: f64,
    /// Largest cell density of the computed median, per unit area.
    pub median_peak: f64,
    /// Largest sample density, per unit area.
    pub sample_linf: f64,
    /// `median_linf / sample_linf`.
    pub linf_ratio: f64,
    /// `median_peak / sample_linf`.
    pub peak_ratio: f64,
    pub solver: SolverSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrilateralTrend {
    /// Reports ordered by decreasing `ε`.
    pub reports: Vec<QuadrilateralReport>,
    /// The density ratio strictly increases as `ε` decreases.
    pub ratio_increasing: bool,
}

/// Rasterizes the four rectangles `[-1-ℓ, -1] × [-ε/2, ε/2]` and its
/// rotations by quarter turns on a `p × p` grid over `[-(1+ℓ), 1+ℓ]²`.
pub fn quadrilateral_samples(epsilon: f64, ell: f64, p: usize) -> Result<QuadrilateralInstance> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidMeasure(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::InvalidMeasure(format!("arm length {ell} must be positive")));
    }
    if p < 2 {
        return Err(Error::InvalidMeasure(format!("grid side {p} is too small")));
    }
    let half_width = 1.0 + ell;
    let e = epsilon / 2.0;
    let rects = [
        [-1.0 - ell, -1.0, -e, e],
        [-e, e, -1.0 - ell, -1.0],
        [1.0, 1.0 + ell, -e, e],
        [-e, e, 1.0, 1.0 + ell],
    ];
    let samples = rects
        .iter()
        .map(|r| rectangle(p, half_width, *r))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadrilateralInstance {
        samples,
        epsilon,
        ell,
        h: 2.0 * half_width / p as f64,
        half_width,
    })
}

/// Median mass and cell count of the central square dilated by one cell.
fn central_mass(median: &GridMeasure, inst: &QuadrilateralInstance) -> (f64, usize) {
    let p = median.side();
    let reach = inst.epsilon / 2.0 + inst.h;
    let centre = |k: usize| -inst.half_width + (k as f64 + 0.5) * inst.h;
    median
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(c, _)| centre(c / p).abs() <= reach && centre(c % p).abs() <= reach)
        .fold((0.0, 0), |(m, n), (_, v)| (m + v, n + 1))
}

/// Solves the instance with uniform weights and reports mass concentration
/// and the density ratio. The solution is returned alongside the report.
pub fn quadrilateral_counterexample(
    epsilon: f64,
    ell: f64,
    p: usize,
    params: &DrParams,
) -> Result<(QuadrilateralReport, MedianSolution)> {
    let inst = quadrilateral_samples(epsilon, ell, p)?;
    let solution = solve_recorded(&inst.samples, &Weights::uniform(4), params)?;
    let area = inst.h * inst.h;
    let (central, cells) = central_mass(&solution.median, &inst);
    let median_linf = central / (cells.max(1) as f64 * area);
    let median_peak = solution.median.field().max() / area;
    let sample_linf = inst.samples.iter().map(|s| s.field().max()).fold(0.0, f64::max) / area;
    let report = QuadrilateralReport {
        epsilon,
        ell,
        p,
        h: inst.h,
        central_mass_fraction: central,
        median_linf,
        median_peak,
        sample_linf,
        linf_ratio: median_linf / sample_linf,
        peak_ratio: median_peak / sample_linf,
        solver: SolverSummary::from(&solution),
    };
    Ok((report, solution))
}

/// Runs the counterexample for each `ε` and checks that the density ratio
/// grows as `ε` shrinks.
pub fn quadrilateral_trend(
    epsilons: &[f64],
    ell: f64,
    p: usize,
    params: &DrParams,
) -> Result<QuadrilateralTrend> {
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let reports = eps
        .iter()
        .map(|&e| quadrilateral_counterexample(e, ell, p, params).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let ratio_increasing = reports.windows(2).all(|w| w[1].linf_ratio > w[0].linf_ratio);
    Ok(QuadrilateralTrend {
        reports,
        ratio_increasing,
    })
}
