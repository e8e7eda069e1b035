//! Ground-truth kernels on point sets: Euclidean geometric medians with
//! optimality certificates, the matching cost `c_λ`, exact transport between
//! small point clouds, and structural checks on computed medians.

mod checks;
mod grid;
mod median;
mod transport;

pub use checks::{convex_hull, hull_distance, moment_bound_check, MomentReport};
pub use grid::{grid_w1_bounds, W1Bounds, MAX_TRANSPORT_POINTS};
pub use median::{c_lambda, dirac_median_check, median_set, weiszfeld, MedianCertificate, MedianSet};
pub use transport::{assignment, w1_exact_small, w1_transport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid2d::GridMeasure;

pub type Point = [f64; 2];

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// A finitely supported probability measure in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point>,
    masses: Vec<f64>,
}

/// Tolerance on the total mass of a [`PointCloud`].
pub const CLOUD_MASS_TOL: f64 = 1e-12;

impl PointCloud {
    pub fn new(points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidMeasure("empty point cloud".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        if masses.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidMeasure("masses must be positive".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > CLOUD_MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass {total} is not 1")));
        }
        Ok(Self { points, masses })
    }

    /// Rescales positive masses to unit total.
    pub fn normalized(points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        Self::new(points, masses.into_iter().map(|m| m / total).collect())
    }

    pub fn dirac(x: Point) -> Self {
        Self { points: vec![x], masses: vec![1.0] }
    }

    /// Cells of `measure` carrying more than `min_mass`, placed at their
    /// centres `origin + h (i + ½, j + ½)` and renormalized.
    pub fn from_grid(measure: &GridMeasure, h: f64, origin: Point, min_mass: f64) -> Result<Self> {
        let (points, masses): (Vec<Point>, Vec<f64>) = measure
            .weighted_cells()
            .filter(|(_, m)| *m > min_mass)
            .map(|([x, y], m)| ([origin[0] + h * x, origin[1] + h * y], m))
            .unzip();
        Self::normalized(points, masses)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.masses.iter().copied())
    }

    pub fn mean(&self) -> Point {
        self.iter()
            .fold([0.0, 0.0], |acc, (x, m)| [acc[0] + m * x[0], acc[1] + m * x[1]])
    }

    /// `∫ |x|^q`.
    pub fn abs_moment(&self, q: f64) -> f64 {
        self.iter().map(|(x, m)| m * x[0].hypot(x[1]).powf(q)).sum()
    }
}
