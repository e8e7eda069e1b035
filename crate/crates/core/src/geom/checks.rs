use serde::{Deserialize, Serialize};

use super::{dist, Point, PointCloud};

/// Convex hull in counter-clockwise order (monotone chain). Collinear and
/// repeated points are dropped; degenerate inputs give one or two vertices.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 2 {
        // All points collinear and coincident after filtering.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

fn segment_distance(a: Point, b: Point, y: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(a, y);
    }
    let t = (((y[0] - a[0]) * d[0] + (y[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist([a[0] + t * d[0], a[1] + t * d[1]], y)
}

/// Distance from `y` to the polygon returned by [`convex_hull`] (zero
/// inside).
pub fn hull_distance(hull: &[Point], y: Point) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => dist(hull[0], y),
        2 => segment_distance(hull[0], hull[1], y),
        n => {
            let inside = (0..n).all(|k| {
                let (a, b) = (hull[k], hull[(k + 1) % n]);
                (b[0] - a[0]) * (y[1] - a[1]) - (b[1] - a[1]) * (y[0] - a[0]) >= 0.0
            });
            if inside {
                0.0
            } else {
                (0..n)
                    .map(|k| segment_distance(hull[k], hull[(k + 1) % n], y))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Outcome of [`moment_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub exponent: f64,
    /// `∫ |x|^q dν`.
    pub median_moment: f64,
    /// `Σ_i ∫ |x|^q dν_i`.
    pub sample_moment_sum: f64,
    pub slack: f64,
    pub moment_ok: bool,
    /// Largest distance from a median support point to the hull of the
    /// samples' supports.
    pub hull_distance: f64,
    pub hull_ok: bool,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.moment_ok && self.hull_ok
    }
}

/// Checks that a median obeys the moment bound
/// `∫ |x|^q dν ≤ Σ_i ∫ |x|^q dν_i` and lies in the convex hull of the
/// samples' supports.
///
/// `h` is the cell width when the measures come from a grid (zero for exact
/// point clouds). It adds `h q max|x|^{q-1}` (or `h^q` for `q < 1`) to the
/// moment bound and allows support points within `h` of the hull.
pub fn moment_bound_check(median: &PointCloud, samples: &[PointCloud], exponent: f64, h: f64) -> MomentReport {
    let lhs = median.abs_moment(exponent);
    let rhs: f64 = samples.iter().map(|s| s.abs_moment(exponent)).sum();
    let all: Vec<Point> = samples.iter().flat_map(|s| s.points().iter().copied()).collect();
    let reach = all
        .iter()
        .chain(median.points())
        .map(|x| x[0].hypot(x[1]))
        .fold(0.0, f64::max);
    let slack = if exponent >= 1.0 {
        h * exponent * reach.powf(exponent - 1.0)
    } else {
        h.powf(exponent)
    };
    let hull = convex_hull(&all);
    let far = median
        .points()
        .iter()
        .map(|y| hull_distance(&hull, *y))
        .fold(0.0, f64::max);
    let hull_tol = if h > 0.0 { h } else { 1e-9 * reach.max(1.0) };
    MomentReport {
        exponent,
        median_moment: lhs,
        sample_moment_sum: rhs,
        slack,
        moment_ok: lhs <= rhs + slack + 1e-12 * rhs.max(1.0),
        hull_distance: far,
        hull_ok: far <= hull_tol,
    }
}
