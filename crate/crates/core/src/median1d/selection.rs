use super::measure::{eval_lower, eval_upper, Measure1D};
use super::{median_bounds, HALF_TOL};
use crate::error::{Error, Result};
use crate::weights::Weights;

type Graph = Vec<(f64, f64)>;

fn check_inputs(weights: &Weights, samples: &[Measure1D], theta: f64) -> Result<()> {
    weights.require_len(samples.len())?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta = {theta} is outside [0, 1]")));
    }
    Ok(())
}

/// Evaluation points for a family of monotone graphs: every vertex abscissa,
/// refined by every pairwise crossing so that, between consecutive points,
/// all graphs are affine and keep a fixed order.
struct Breaks {
    xs: Vec<f64>,
    /// Per point, graphs whose value is pinned to a crossing ordinate. At a
    /// crossing the two graphs are equal in exact arithmetic; evaluating
    /// them separately would split one value into two neighbouring floats.
    pins: Vec<Vec<(usize, f64)>>,
}

fn refined_abscissas(graphs: &[&[(f64, f64)]]) -> Breaks {
    let mut xs: Vec<f64> = graphs.iter().flat_map(|g| g.iter().map(|p| p.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut out = Breaks {
        xs: Vec::with_capacity(xs.len() * 2),
        pins: Vec::with_capacity(xs.len() * 2),
    };
    let mut right = vec![0.0; graphs.len()];
    let mut left = vec![0.0; graphs.len()];
    let mut cuts: Vec<(f64, usize, usize, f64)> = Vec::new();
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        out.xs.push(a);
        out.pins.push(Vec::new());
        for (k, g) in graphs.iter().enumerate() {
            right[k] = eval_upper(g, a);
            left[k] = eval_lower(g, b);
        }
        cuts.clear();
        for i in 0..graphs.len() {
            for j in i + 1..graphs.len() {
                let da = right[i] - right[j];
                let db = left[i] - left[j];
                // Differences at rounding level mean the graphs meet at an
                // endpoint, which is already a break.
                let noise = 8.0
                    * f64::EPSILON
                    * (right[i].abs() + right[j].abs() + left[i].abs() + left[j].abs());
                if da.abs() <= noise || db.abs() <= noise {
                    continue;
                }
                if (da < 0.0) != (db < 0.0) {
                    let s = a + (b - a) * da / (da - db);
                    if s > a && s < b {
                        let y = if right[i] == left[i] {
                            right[i]
                        } else if right[j] == left[j] {
                            right[j]
                        } else {
                            let r = (s - a) / (b - a);
                            right[i] + (left[i] - right[i]) * r
                        };
                        cuts.push((s, i, j, y));
                    }
                }
            }
        }
        cuts.sort_by(|p, q| p.0.total_cmp(&q.0));
        for &(s, i, j, y) in cuts.iter() {
            if out.xs.last() != Some(&s) {
                out.xs.push(s);
                out.pins.push(Vec::new());
            }
            let pins = out.pins.last_mut().expect("pushed above");
            pins.push((i, y));
            pins.push((j, y));
        }
    }
    if let Some(&last) = xs.last() {
        out.xs.push(last);
        out.pins.push(Vec::new());
    }
    out
}

/// Graph values at a break, left limits first when `left` is set.
fn values_at(graphs: &[&[(f64, f64)]], breaks: &Breaks, k: usize, left: bool, values: &mut [f64]) {
    let s = breaks.xs[k];
    for (v, g) in values.iter_mut().zip(graphs) {
        *v = if left { eval_lower(g, s) } else { eval_upper(g, s) };
    }
    for &(i, y) in &breaks.pins[k] {
        if i < values.len() {
            values[i] = y;
        }
    }
}

/// Graph of `s ↦ (1-θ) m⁻(g_1(s)..g_N(s)) + θ m⁺(...)` for monotone graphs.
fn pointwise_median(graphs: &[&[(f64, f64)]], weights: &[f64], theta: f64) -> Graph {
    let n = graphs.len();
    let mut order = vec![0usize; n];
    let mut values = vec![0.0; n];
    let mut combine = |values: &[f64]| {
        let (lo, hi) = median_bounds(values, weights, &mut order);
        if theta == 0.0 || lo == hi {
            lo
        } else if theta == 1.0 {
            hi
        } else {
            (1.0 - theta) * lo + theta * hi
        }
    };
    let breaks = refined_abscissas(graphs);
    let mut out = Vec::with_capacity(2 * breaks.xs.len());
    for (k, &s) in breaks.xs.iter().enumerate() {
        values_at(graphs, &breaks, k, true, &mut values);
        let lower = combine(&values);
        values_at(graphs, &breaks, k, false, &mut values);
        let upper = combine(&values);
        out.push((s, lower));
        if upper != lower {
            out.push((s, upper));
        }
    }
    out
}

/// Vertical median selection: the measure whose CDF is, pointwise, the
/// θ-interpolation between the lower and upper weighted medians of the
/// sample CDFs. `θ = 0` takes the lower median of the CDF values, which
/// puts mass as far right as possible.
pub fn vertical_selection(weights: &Weights, samples: &[Measure1D], theta: f64) -> Result<Measure1D> {
    check_inputs(weights, samples, theta)?;
    let graphs: Vec<&[(f64, f64)]> = samples.iter().map(Measure1D::points).collect();
    let cdf = pointwise_median(&graphs, weights.as_slice(), theta);
    Measure1D::from_polyline(cdf)
}

/// Horizontal median selection: the measure whose quantile function is the
/// pointwise θ-interpolation of the lower and upper weighted medians of the
/// sample quantile functions.
pub fn horizontal_selection(
    weights: &Weights,
    samples: &[Measure1D],
    theta: f64,
) -> Result<Measure1D> {
    check_inputs(weights, samples, theta)?;
    let quantiles: Vec<Graph> = samples.iter().map(Measure1D::quantile_graph).collect();
    let graphs: Vec<&[(f64, f64)]> = quantiles.iter().map(Vec::as_slice).collect();
    let q = pointwise_median(&graphs, weights.as_slice(), theta);
    Measure1D::from_quantile_graph(q)
}

/// `∫ |g_a - g_b|` for two monotone graphs, extended constantly outside
/// their ranges.
fn graph_l1(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let xs = refined_abscissas(&[a, b]).xs;
    xs.windows(2)
        .map(|w| {
            let da = eval_upper(a, w[0]) - eval_upper(b, w[0]);
            let db = eval_lower(a, w[1]) - eval_lower(b, w[1]);
            0.5 * (da.abs() + db.abs()) * (w[1] - w[0])
        })
        .sum()
}

/// Order-1 Wasserstein distance `∫ |F_μ - F_ν| dx`, exact on the merged
/// breakpoints.
pub fn w1_1d(mu: &Measure1D, nu: &Measure1D) -> f64 {
    graph_l1(mu.points(), nu.points())
}

/// The same distance through quantile functions, `∫_0^1 |Q_μ - Q_ν| dt`.
pub fn w1_1d_quantile(mu: &Measure1D, nu: &Measure1D) -> f64 {
    graph_l1(&mu.quantile_graph(), &nu.quantile_graph())
}

/// Weighted dispersion `Σ λ_i W₁(ν_i, μ)`.
pub fn dispersion(weights: &Weights, samples: &[Measure1D], mu: &Measure1D) -> Result<f64> {
    weights.require_len(samples.len())?;
    Ok(weights
        .iter()
        .zip(samples)
        .map(|(l, s)| l * w1_1d(s, mu))
        .sum())
}

/// Checks the pointwise characterization of one-dimensional medians: the
/// candidate's CDF lies between the lower and upper weighted medians of the
/// sample CDFs everywhere.
///
/// The tolerance acts in both directions of the CDF graph: ordinates may be
/// off by `tol` and abscissas by `tol · max(1, |x|)`, so an atom placed one
/// rounding error away from a sample atom is still accepted. Left and right
/// limits are compared at every breakpoint of the candidate and the samples
/// (including crossings), and all functions involved are affine in between,
/// so the check is exhaustive.
pub fn verify_median_1d(
    weights: &Weights,
    samples: &[Measure1D],
    candidate: &Measure1D,
    tol: f64,
) -> Result<bool> {
    weights.require_len(samples.len())?;
    let mut graphs: Vec<&[(f64, f64)]> = samples.iter().map(Measure1D::points).collect();
    graphs.push(candidate.points());
    let n = samples.len();
    let mut order = vec![0usize; n];
    let mut below = vec![0.0; n];
    let mut above = vec![0.0; n];
    let w = weights.as_slice();
    let breaks = refined_abscissas(&graphs);
    for &s in &breaks.xs {
        let dx = tol * s.abs().max(1.0);
        for (k, g) in graphs[..n].iter().enumerate() {
            below[k] = eval_lower(g, s - dx);
            above[k] = eval_upper(g, s + dx);
        }
        let lo = median_bounds(&below, w, &mut order).0;
        let hi = median_bounds(&above, w, &mut order).1;
        let c_left = eval_lower(candidate.points(), s);
        let c_right = eval_upper(candidate.points(), s);
        if c_left < lo - tol || c_right > hi + tol {
            return Ok(false);
        }
        // The left limit must also respect the upper band, and the right
        // value the lower one.
        let hi_left = {
            for (k, g) in graphs[..n].iter().enumerate() {
                above[k] = eval_lower(g, s + dx);
            }
            median_bounds(&above, w, &mut order).1
        };
        let lo_right = {
            for (k, g) in graphs[..n].iter().enumerate() {
                below[k] = eval_upper(g, s - dx);
            }
            median_bounds(&below, w, &mut order).0
        };
        if c_left > hi_left + tol || c_right < lo_right - tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True when no sub-family of weights sums to exactly one half (up to
/// [`HALF_TOL`]). Then the lower and upper medians of the CDFs coincide
/// everywhere and every selection returns the same, unique, median.
pub fn selection_is_unique(weights: &Weights) -> bool {
    // Subset sums below one half, deduplicated; N is small in practice and
    // the dedup keeps the set from exploding when many weights are equal.
    let mut sums: Vec<f64> = vec![0.0];
    for l in weights.iter() {
        let mut next = sums.clone();
        for s in &sums {
            let t = s + l;
            if (t - 0.5).abs() <= HALF_TOL {
                return false;
            }
            if t < 0.5 {
                next.push(t);
            }
        }
        next.sort_by(f64::total_cmp);
        next.dedup_by(|a, b| (*a - *b).abs() <= 1e-13);
        sums = next;
    }
    true
}
