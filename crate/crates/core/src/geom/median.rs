use serde::{Deserialize, Serialize};

use super::{dist, Point, PointCloud};
use crate::error::{Error, Result};
use crate::median1d::weighted_median_interval;
use crate::weights::Weights;

/// A point together with the subgradients witnessing its optimality:
/// `p_i = (x - x_i)/‖x - x_i‖` off the data and `‖p_i‖ ≤ 1` at data points,
/// with `residual = ‖Σ λ_i p_i‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianCertificate {
    pub point: Point,
    pub subgradients: Vec<Point>,
    pub residual: f64,
}

/// Points closer than this (relative to the configuration's scale) count as
/// coincident with the iterate.
const ANCHOR_TOL: f64 = 1e-12;
/// Relative offset used to leave a non-optimal data point.
const RESTART_OFFSET: f64 = 1e-9;

/// Certificate at `x` with the minimal-norm choice of subgradients at the
/// data points coinciding with `x`.
fn certificate(points: &[Point], w: &[f64], x: Point, anchor: f64) -> MedianCertificate {
    let mut free = [0.0, 0.0];
    let mut anchored = 0.0;
    let mut subgradients = vec![[0.0, 0.0]; points.len()];
    for ((xi, l), p) in points.iter().zip(w).zip(&mut subgradients) {
        let d = dist(x, *xi);
        if d > anchor {
            *p = [(x[0] - xi[0]) / d, (x[1] - xi[1]) / d];
            free[0] += l * p[0];
            free[1] += l * p[1];
        } else {
            anchored += l;
        }
    }
    if anchored > 0.0 {
        // Every anchored subgradient points against the free part, as far
        // as the unit ball allows.
        let norm = free[0].hypot(free[1]);
        if norm > 0.0 {
            let t = (norm / anchored).min(1.0) / norm;
            let p = [-free[0] * t, -free[1] * t];
            for (xi, s) in points.iter().zip(&mut subgradients) {
                if dist(x, *xi) <= anchor {
                    *s = p;
                }
            }
        }
    }
    let total = points
        .iter()
        .zip(w)
        .zip(&subgradients)
        .fold([0.0, 0.0], |acc, ((_, l), p)| [acc[0] + l * p[0], acc[1] + l * p[1]]);
    MedianCertificate { point: x, subgradients, residual: total[0].hypot(total[1]) }
}

fn objective(points: &[Point], w: &[f64], x: Point) -> f64 {
    points.iter().zip(w).map(|(p, l)| l * dist(x, *p)).sum()
}

fn scale_of(points: &[Point]) -> f64 {
    let c = points[0];
    points.iter().map(|p| dist(*p, c)).fold(0.0, f64::max)
}

/// Weighted geometric median `argmin_x Σ λ_i ‖x - x_i‖` by Weiszfeld's
/// iteration with Newton acceleration, returned with a certificate whose
/// residual is at most `tol`.
///
/// Data points are tested for optimality first; if an iterate lands on a
/// non-optimal data point it is pushed off along the descent direction.
pub fn weiszfeld(points: &[Point], weights: &Weights, tol: f64, max_iter: usize) -> Result<MedianCertificate> {
    weights.require_len(points.len())?;
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coordinate".into()));
    }
    let w = weights.as_slice();
    let scale = scale_of(points);
    if scale == 0.0 {
        return Ok(certificate(points, w, points[0], 0.0));
    }
    let anchor = ANCHOR_TOL * scale;

    for (xi, l) in points.iter().zip(w) {
        if *l > 0.0 {
            let cert = certificate(points, w, *xi, anchor);
            if cert.residual <= tol {
                return Ok(cert);
            }
        }
    }

    let mut x = points
        .iter()
        .zip(w)
        .fold([0.0, 0.0], |acc, (p, l)| [acc[0] + l * p[0], acc[1] + l * p[1]]);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let cert = certificate(points, w, x, anchor);
        residual = cert.residual;
        if residual <= tol {
            return Ok(cert);
        }
        let mut num = [0.0, 0.0];
        let mut den = 0.0;
        let mut grad = [0.0, 0.0];
        let mut hess = [0.0; 3];
        let mut at_anchor = false;
        for (xi, l) in points.iter().zip(w) {
            let d = dist(x, *xi);
            if d <= anchor {
                at_anchor = true;
                continue;
            }
            let u = [(x[0] - xi[0]) / d, (x[1] - xi[1]) / d];
            num[0] += l * xi[0] / d;
            num[1] += l * xi[1] / d;
            den += l / d;
            grad[0] += l * u[0];
            grad[1] += l * u[1];
            hess[0] += l * (1.0 - u[0] * u[0]) / d;
            hess[1] -= l * u[0] * u[1] / d;
            hess[2] += l * (1.0 - u[1] * u[1]) / d;
        }
        if at_anchor {
            let g = grad[0].hypot(grad[1]);
            let step = RESTART_OFFSET * scale / g.max(f64::MIN_POSITIVE);
            x = [x[0] - grad[0] * step, x[1] - grad[1] * step];
            continue;
        }
        let xw = [num[0] / den, num[1] / den];
        let mut next = xw;
        let det = hess[0] * hess[2] - hess[1] * hess[1];
        if det > 1e-14 * (hess[0] + hess[2]).powi(2) {
            let xn = [
                x[0] - (hess[2] * grad[0] - hess[1] * grad[1]) / det,
                x[1] - (hess[0] * grad[1] - hess[1] * grad[0]) / det,
            ];
            if objective(points, w, xn) < objective(points, w, xw) {
                next = xn;
            }
        }
        if next == x {
            // Rounding floor: the certificate at x is the best available.
            return Ok(cert);
        }
        x = next;
    }
    Err(Error::NoConvergence { solver: "weiszfeld", iterations: max_iter, residual })
}

/// `c_λ(x_1, …, x_N) = min_y Σ λ_i ‖x_i - y‖`, evaluated at the certified
/// median.
pub fn c_lambda(points: &[Point], weights: &Weights, tol: f64) -> Result<f64> {
    let cert = weiszfeld(points, weights, tol, 10_000)?;
    Ok(objective(points, weights.as_slice(), cert.point))
}

/// The set of weighted geometric medians of a finite configuration: a single
/// point unless every point with positive weight lies on one line, where it
/// is a segment given by the one-dimensional weighted median interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MedianSet {
    Point(Point),
    Segment(Point, Point),
}

impl MedianSet {
    pub fn distance(&self, y: Point) -> f64 {
        match *self {
            Self::Point(x) => dist(x, y),
            Self::Segment(a, b) => {
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                if len2 == 0.0 {
                    return dist(a, y);
                }
                let t = (((y[0] - a[0]) * d[0] + (y[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
                dist([a[0] + t * d[0], a[1] + t * d[1]], y)
            }
        }
    }
}

/// Computes the full median set (see [`MedianSet`]).
pub fn median_set(points: &[Point], weights: &Weights, tol: f64) -> Result<MedianSet> {
    weights.require_len(points.len())?;
    let active: Vec<(Point, f64)> = points
        .iter()
        .copied()
        .zip(weights.iter())
        .filter(|(_, l)| *l > 0.0)
        .collect();
    let Some(&(origin, _)) = active.first() else {
        return Err(Error::InvalidArgument("no point with positive weight".into()));
    };
    let (far, reach) = active
        .iter()
        .map(|(p, _)| (*p, dist(*p, origin)))
        .fold((origin, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if reach == 0.0 {
        return Ok(MedianSet::Point(origin));
    }
    let dir = [(far[0] - origin[0]) / reach, (far[1] - origin[1]) / reach];
    let collinear = active.iter().all(|(p, _)| {
        let v = [p[0] - origin[0], p[1] - origin[1]];
        (v[0] * dir[1] - v[1] * dir[0]).abs() <= ANCHOR_TOL * reach
    });
    if collinear {
        let t: Vec<f64> = active
            .iter()
            .map(|(p, _)| (p[0] - origin[0]) * dir[0] + (p[1] - origin[1]) * dir[1])
            .collect();
        let w = Weights::normalized(active.iter().map(|(_, l)| *l).collect())?;
        let iv = weighted_median_interval(&t, &w)?;
        let at = |s: f64| [origin[0] + s * dir[0], origin[1] + s * dir[1]];
        return Ok(if iv.lower == iv.upper {
            MedianSet::Point(at(iv.lower))
        } else {
            MedianSet::Segment(at(iv.lower), at(iv.upper))
        });
    }
    Ok(MedianSet::Point(weiszfeld(points, weights, tol, 10_000)?.point))
}

/// Whether every support point of `candidate` lies within `tol` of the
/// ground median set of the Dirac samples at `positions`, i.e. whether the
/// candidate is (up to `tol`) a Wasserstein median of those Diracs.
pub fn dirac_median_check(positions: &[Point], weights: &Weights, candidate: &PointCloud, tol: f64) -> Result<bool> {
    let set = median_set(positions, weights, 1e-12)?;
    Ok(candidate.points().iter().all(|y| set.distance(*y) <= tol))
}
