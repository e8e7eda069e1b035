use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Masses below this are dropped when building atomic measures.
pub const MIN_MASS: f64 = 1e-15;

/// A probability measure on the real line made of atoms and
/// piecewise-constant densities.
///
/// The measure is stored as the graph of its CDF: a polyline of points
/// `(x, F)` that is nondecreasing in both coordinates, runs from `F = 0` to
/// `F = 1`, and is canonical (no repeated points, no collinear interior
/// points). Vertical pieces are atoms, sloped pieces carry a constant
/// density, horizontal pieces are gaps in the support. Swapping the two
/// coordinates gives the graph of the quantile function, which is how the
/// horizontal constructions are carried out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure1D {
    points: Vec<(f64, f64)>,
}

/// One piece of the CDF graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub x1: f64,
    pub f0: f64,
    pub f1: f64,
}

impl Segment {
    pub fn mass(&self) -> f64 {
        self.f1 - self.f0
    }

    pub fn is_atom(&self) -> bool {
        self.x1 == self.x0 && self.f1 > self.f0
    }

    /// Density on a sloped piece, `None` for atoms.
    pub fn density(&self) -> Option<f64> {
        (self.x1 > self.x0).then(|| (self.f1 - self.f0) / (self.x1 - self.x0))
    }
}

impl Measure1D {
    /// Atomic measure `Σ m_k δ_{x_k}`. Duplicate positions are merged, masses
    /// under [`MIN_MASS`] dropped, and the rest rescaled to total mass one.
    pub fn from_atoms(positions: &[f64], masses: &[f64]) -> Result<Self> {
        if positions.len() != masses.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} positions but {} masses",
                positions.len(),
                masses.len()
            )));
        }
        check_finite(positions, "position")?;
        check_masses(masses)?;
        let mut atoms: Vec<(f64, f64)> = positions
            .iter()
            .zip(masses)
            .filter(|(_, m)| **m >= MIN_MASS)
            .map(|(x, m)| (*x, *m))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        let mut points = Vec::with_capacity(2 * atoms.len());
        let mut cum = 0.0;
        for (x, m) in atoms {
            points.push((x, cum / total));
            cum += m;
            points.push((x, cum / total));
        }
        Self::from_polyline(points)
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            points: vec![(x, 0.0), (x, 1.0)],
        }
    }

    /// Histogram with bins `[left_k, right_k]` carrying `masses[k]` spread
    /// uniformly. Bins must not overlap; zero-width bins become atoms.
    pub fn from_histogram(left: &[f64], right: &[f64], masses: &[f64]) -> Result<Self> {
        if left.len() != right.len() || left.len() != masses.len() {
            return Err(Error::InvalidMeasure("histogram columns differ in length".into()));
        }
        check_finite(left, "bin edge")?;
        check_finite(right, "bin edge")?;
        check_masses(masses)?;
        let mut bins: Vec<(f64, f64, f64)> = left
            .iter()
            .zip(right)
            .zip(masses)
            .filter(|(_, m)| **m >= MIN_MASS)
            .map(|((l, r), m)| (*l, *r, *m))
            .collect();
        if let Some(b) = bins.iter().find(|b| b.1 < b.0) {
            return Err(Error::InvalidMeasure(format!("bin [{}, {}] is reversed", b.0, b.1)));
        }
        bins.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for pair in bins.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::InvalidMeasure(format!(
                    "bins [{}, {}] and [{}, {}] overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        let total: f64 = bins.iter().map(|b| b.2).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        let mut points = Vec::with_capacity(2 * bins.len());
        let mut cum = 0.0;
        for (l, r, m) in bins {
            points.push((l, cum / total));
            cum += m;
            points.push((r, cum / total));
        }
        Self::from_polyline(points)
    }

    /// Histogram on the uniform grid `edges[0] < edges[1] < ...`.
    pub fn from_uniform_bins(edges: &[f64], masses: &[f64]) -> Result<Self> {
        if edges.len() != masses.len() + 1 {
            return Err(Error::InvalidMeasure("need one more edge than masses".into()));
        }
        Self::from_histogram(&edges[..masses.len()], &edges[1..], masses)
    }

    /// Builds a measure from a CDF graph. Points must be nondecreasing in
    /// both coordinates and start at `F = 0`; the last ordinate is rescaled
    /// to one.
    pub fn from_polyline(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidMeasure("CDF graph needs at least two points".into()));
        }
        for p in &points {
            if !p.0.is_finite() || !p.1.is_finite() {
                return Err(Error::InvalidMeasure("non-finite CDF point".into()));
            }
        }
        let top = points[points.len() - 1].1;
        if points[0].1.abs() > 1e-12 || !(top > 0.0) {
            return Err(Error::InvalidMeasure("CDF graph must rise from 0".into()));
        }
        for w in points.windows(2) {
            if w[1].0 < w[0].0 || w[1].1 < w[0].1 - 1e-12 {
                return Err(Error::InvalidMeasure("CDF graph is not monotone".into()));
            }
        }
        let scaled = points.into_iter().map(|(x, f)| (x, f / top)).collect();
        Ok(Self {
            points: canonical_cdf(scaled),
        })
    }

    /// Graph vertices `(x, F)`.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.points.windows(2).map(|w| Segment {
            x0: w[0].0,
            x1: w[1].0,
            f0: w[0].1,
            f1: w[1].1,
        })
    }

    /// Atoms as `(position, mass)` pairs.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.segments()
            .filter(Segment::is_atom)
            .map(|s| (s.x0, s.mass()))
            .collect()
    }

    pub fn is_atomic(&self) -> bool {
        self.segments().all(|s| s.is_atom() || s.mass() == 0.0)
    }

    /// Sloped pieces as `(x0, x1, density)`.
    pub fn density_pieces(&self) -> Vec<(f64, f64, f64)> {
        self.segments()
            .filter_map(|s| s.density().filter(|d| *d > 0.0).map(|d| (s.x0, s.x1, d)))
            .collect()
    }

    /// `F(x) = μ((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        eval_upper(&self.points, x)
    }

    /// `F(x⁻) = μ((-∞, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        eval_lower(&self.points, x)
    }

    /// Left-continuous quantile `Q(t) = inf{x : F(x) ≥ t}`; `t` is clamped
    /// to `(0, 1]` so that `Q(0)` returns the left end of the support.
    pub fn quantile(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let i = self.points.partition_point(|p| p.1 < t);
        if i == 0 {
            return self.points[0].0;
        }
        if i >= self.points.len() {
            return self.points[self.points.len() - 1].0;
        }
        let (x0, f0) = self.points[i - 1];
        let (x1, f1) = self.points[i];
        if f1 == t || f1 == f0 {
            x1.min(if f1 == t { x1 } else { x0 })
        } else {
            x0 + (x1 - x0) * (t - f0) / (f1 - f0)
        }
    }

    /// Smallest and largest support points.
    pub fn support(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// `∫ g dμ` for `g` given with its exact integral over sloped pieces.
    fn integrate(&self, point: impl Fn(f64) -> f64, piece: impl Fn(f64, f64) -> f64) -> f64 {
        self.segments()
            .map(|s| {
                if s.is_atom() {
                    s.mass() * point(s.x0)
                } else if s.mass() > 0.0 {
                    s.mass() * piece(s.x0, s.x1) / (s.x1 - s.x0)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|x| x, |a, b| (b * b - a * a) / 2.0)
    }

    /// `∫ |x|^p dμ` for `p > 0`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        let antideriv = |x: f64| x.signum() * x.abs().powf(p + 1.0) / (p + 1.0);
        self.integrate(|x| x.abs().powf(p), |a, b| antideriv(b) - antideriv(a))
    }

    /// Pushforward under `x ↦ x + shift`.
    pub fn translate(&self, shift: f64) -> Self {
        Self {
            points: self.points.iter().map(|(x, f)| (x + shift, *f)).collect(),
        }
    }

    /// The mixture `(1 - t) self + t other` for `t ∈ [0, 1]`.
    pub fn mixture(&self, other: &Self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidMeasure(format!("mixture weight {t} outside [0, 1]")));
        }
        let mut xs: Vec<f64> = self.points.iter().chain(&other.points).map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut points = Vec::with_capacity(2 * xs.len());
        for x in xs {
            let left = (1.0 - t) * self.cdf_left(x) + t * other.cdf_left(x);
            let right = (1.0 - t) * self.cdf(x) + t * other.cdf(x);
            points.push((x, left));
            if right > left {
                points.push((x, right));
            }
        }
        Self::from_polyline(points)
    }

    /// Quantile graph `(t, Q)`, a monotone polyline over `t ∈ [0, 1]`.
    pub(crate) fn quantile_graph(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|(x, f)| (*f, *x)).collect()
    }

    /// Inverse of [`Self::quantile_graph`].
    pub(crate) fn from_quantile_graph(graph: Vec<(f64, f64)>) -> Result<Self> {
        Self::from_polyline(graph.into_iter().map(|(t, x)| (x, t)).collect())
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::InvalidMeasure(format!("{what} {v} is not finite"))),
        None => Ok(()),
    }
}

fn check_masses(masses: &[f64]) -> Result<()> {
    match masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
        Some(m) => Err(Error::InvalidMeasure(format!("mass {m} is negative or not finite"))),
        None => Ok(()),
    }
}

/// Largest ordinate of a monotone polyline at abscissa `s` (right limit),
/// extended constantly outside its range.
pub(crate) fn eval_upper(pts: &[(f64, f64)], s: f64) -> f64 {
    let last = pts.len() - 1;
    if s < pts[0].0 {
        return pts[0].1;
    }
    if s >= pts[last].0 {
        return pts[last].1;
    }
    let i = pts.partition_point(|p| p.0 <= s) - 1;
    let (x0, y0) = pts[i];
    if x0 == s {
        return y0;
    }
    let (x1, y1) = pts[i + 1];
    y0 + (y1 - y0) * (s - x0) / (x1 - x0)
}

/// Smallest ordinate at abscissa `s` (left limit).
pub(crate) fn eval_lower(pts: &[(f64, f64)], s: f64) -> f64 {
    let last = pts.len() - 1;
    if s <= pts[0].0 {
        return pts[0].1;
    }
    if s > pts[last].0 {
        return pts[last].1;
    }
    let i = pts.partition_point(|p| p.0 < s);
    let (x1, y1) = pts[i];
    if x1 == s {
        return y1;
    }
    let (x0, y0) = pts[i - 1];
    y0 + (y1 - y0) * (s - x0) / (x1 - x0)
}

/// Removes repeated and collinear points, clamps rounding drift so the graph
/// stays monotone inside `[0, 1]`, and trims flat runs at levels 0 and 1.
fn canonical_cdf(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut clean: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    let mut prev_f = 0.0f64;
    for (x, f) in points {
        let f = f.clamp(prev_f, 1.0);
        prev_f = f;
        if let Some(&(px, pf)) = clean.last() {
            if px == x && pf == f {
                continue;
            }
        }
        clean.push((x, f));
    }
    // Level-0 prefix and level-1 suffix are not part of the support.
    let start = clean.iter().rposition(|p| p.1 == 0.0).unwrap_or(0);
    let end = clean
        .iter()
        .position(|p| p.1 == 1.0)
        .unwrap_or(clean.len() - 1);
    let mut trimmed: Vec<(f64, f64)> = clean[start..=end.max(start)].to_vec();
    if trimmed.len() == 1 {
        trimmed.push(trimmed[0]);
    }
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(trimmed.len());
    for p in trimmed {
        while out.len() >= 2 {
            let (ax, af) = out[out.len() - 2];
            let (bx, bf) = out[out.len() - 1];
            let cross = (bx - ax) * (p.1 - af) - (bf - af) * (p.0 - ax);
            let scale = ((p.0 - ax).abs() + (p.1 - af).abs()).max(1e-300);
            let same_direction = (bx - ax) * (p.0 - bx) >= 0.0 && (bf - af) * (p.1 - bf) >= 0.0;
            if same_direction && cross.abs() <= 1e-15 * scale * scale.max(1.0) {
                out.pop();
            } else {
                break;
            }
        }
        out.push(p);
    }
    out
}
