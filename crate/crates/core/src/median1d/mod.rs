//! Exact one-dimensional Wasserstein medians.
//!
//! On the real line the order-1 Wasserstein distance is the L¹ distance
//! between cumulative distribution functions (or between quantile
//! functions), so a measure is a median exactly when its CDF is, at every
//! point, a weighted median of the sample CDFs. Two canonical selections
//! follow:
//!
//! * the **vertical** selection interpolates the lower and upper pointwise
//!   medians of the CDFs, `F_θ = (1-θ) m⁻(F_1..F_N) + θ m⁺(F_1..F_N)`;
//! * the **horizontal** selection does the same on quantile functions.
//!
//! Measures are stored as monotone polylines in the `(x, F)` plane (see
//! [`Measure1D`]), which makes both views available from the same data and
//! keeps every computation here exact up to floating-point rounding.

mod measure;
mod selection;

pub use measure::{Measure1D, Segment};
pub use selection::{
    dispersion, horizontal_selection, selection_is_unique, verify_median_1d, vertical_selection,
    w1_1d, w1_1d_quantile,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::Weights;

/// Slack used when comparing cumulative weights against one half.
pub const HALF_TOL: f64 = 1e-12;

/// The closed interval `[m⁻, m⁺]` of weighted medians of a finite sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianInterval {
    pub lower: f64,
    pub upper: f64,
}

impl MedianInterval {
    pub fn contains(&self, y: f64, tol: f64) -> bool {
        y >= self.lower - tol && y <= self.upper + tol
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `(1-θ) m⁻ + θ m⁺`.
    pub fn interpolate(&self, theta: f64) -> f64 {
        (1.0 - theta) * self.lower + theta * self.upper
    }
}

/// Lower and upper weighted medians of `x`.
///
/// `m⁻ = inf{y : Σ_{x_i ≤ y} λ_i ≥ 1/2}` and `m⁺ = sup{y : Σ_{x_i < y} λ_i ≤ 1/2}`,
/// with cumulative sums compared to one half up to [`HALF_TOL`]. Both ends
/// are sample values.
pub fn weighted_median_interval(x: &[f64], weights: &Weights) -> Result<MedianInterval> {
    weights.require_len(x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("sample values must be finite".into()));
    }
    let mut order = vec![0usize; x.len()];
    let (lower, upper) = median_bounds(x, weights.as_slice(), &mut order);
    Ok(MedianInterval { lower, upper })
}

/// Allocation-free core of [`weighted_median_interval`]; `order` is scratch
/// space of the same length as `x`.
pub(crate) fn median_bounds(x: &[f64], w: &[f64], order: &mut [usize]) -> (f64, f64) {
    debug_assert_eq!(x.len(), w.len());
    debug_assert_eq!(x.len(), order.len());
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    // N is small everywhere this is called in a loop; insertion sort wins.
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && x[order[j - 1]] > x[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }

    let mut lower = None;
    let mut upper = x[order[order.len() - 1]];
    let mut cum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let value = x[order[k]];
        while k < order.len() && x[order[k]] == value {
            cum += w[order[k]];
            k += 1;
        }
        if lower.is_none() && cum >= 0.5 - HALF_TOL {
            lower = Some(value);
        }
        if cum > 0.5 + HALF_TOL {
            upper = value;
            break;
        }
    }
    let lower = lower.unwrap_or(upper);
    (lower, upper)
}

/// Indices `i` with `x_i = m⁻(x)` (first vector) and `x_i = m⁺(x)` (second).
pub fn attaining_indices(x: &[f64], weights: &Weights) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = weighted_median_interval(x, weights)?;
    let lower = (0..x.len()).filter(|&i| x[i] == m.lower).collect();
    let upper = (0..x.len()).filter(|&i| x[i] == m.upper).collect();
    Ok((lower, upper))
}
