//! Penalized p-Laplace approximation of the median problem.
//!
//! For `ε > 0` and an exponent `p ≥ 2` the functional
//!
//! ```text
//! J_ε(u) = (1/p) Σ_i Σ_c ‖∇u_i‖^p + (1/2ε) Σ_c (Σ_j λ_j u_j)₊² - Σ_i λ_i ⟨u_i, ν_i⟩
//! ```
//!
//! is minimized over potentials `u = (u_1, …, u_N)` normalized by
//! `mean(u_i) = 0` for `i < N`. From the minimizer one reads off flows
//! `σ_i = ‖∇u_i‖^{p-2} ∇u_i / λ_i` and an approximate median
//! `ν^ε = (Σ_j λ_j u_j)₊ / ε`, which satisfy `-div σ_i + ν^ε = ν_i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid2d::{check_same_grid, div_into, grad_h, FlowField, GridMeasure, ScalarField};
use crate::weights::Weights;

/// Above this exponent the power term is accumulated in log-magnitude form.
const LOG_FORM_EXPONENT: f64 = 8.0;

/// Dual potentials `u_1, …, u_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialVector {
    pub u: Vec<ScalarField>,
}

impl PotentialVector {
    pub fn zeros(p: usize, n: usize) -> Self {
        Self { u: vec![ScalarField::zeros(p); n] }
    }

    /// Shifts `u_1, …, u_{N-1}` to mean zero and moves the removed constants
    /// onto `u_N`, keeping `Σ_j λ_j u_j` unchanged.
    pub fn normalize(&mut self, weights: &Weights) {
        let n = self.u.len();
        let mut carried = 0.0;
        for (u, l) in self.u[..n - 1].iter_mut().zip(weights.iter()) {
            let m = u.mean();
            u.add_constant(-m);
            carried += l * m;
        }
        self.u[n - 1].add_constant(carried / weights.as_slice()[n - 1]);
    }

    fn dot(&self, other: &Self) -> f64 {
        self.u.iter().zip(&other.u).map(|(a, b)| a.dot(b)).sum()
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (u, v) in self.u.iter_mut().zip(&x.u) {
            u.axpy(a, v);
        }
    }

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.u.iter_mut().for_each(|u| u.scale(a));
        out
    }

}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLaplaceParams {
    pub epsilon: f64,
    /// Exponent `p`.
    pub exponent: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Factor applied to the Levenberg–Marquardt damping after a successful
    /// step; its inverse is applied after a rejected one.
    pub backtrack: f64,
    /// Conjugate-gradient iterations allowed per Newton step.
    pub max_cg: usize,
    /// Stop once the projected gradient norm is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PLaplaceParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            exponent: 4.0,
            armijo: 1e-4,
            backtrack: 0.5,
            max_cg: 200,
            tol: 1e-6,
            max_iter: 5_000,
        }
    }
}

impl PLaplaceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.exponent >= 2.0) || !self.exponent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need epsilon > 0 and exponent >= 2, got {} and {}",
                self.epsilon, self.exponent
            )));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument("line-search constants must lie in (0, 1)".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        Ok(())
    }
}

fn validate_inputs(u: &PotentialVector, samples: &[GridMeasure], weights: &Weights) -> Result<usize> {
    weights.require_len(samples.len())?;
    if u.u.len() != samples.len() {
        return Err(Error::InvalidArgument("one potential per sample is required".into()));
    }
    let p = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("no samples".into()))?
        .side();
    for f in samples.iter().map(|s| s.side()).chain(u.u.iter().map(|u| u.side())) {
        check_same_grid(p, f)?;
    }
    Ok(p)
}

/// `(1/q) Σ_c m_c^q` for cell magnitudes `m`; in log form for large `q`.
fn power_sum(m: &ScalarField, q: f64) -> f64 {
    if q <= LOG_FORM_EXPONENT {
        return m.as_slice().iter().map(|v| v.powf(q)).sum::<f64>() / q;
    }
    let top = m.max();
    if top == 0.0 {
        return 0.0;
    }
    let rest: f64 = m.as_slice().iter().map(|v| ((v / top).ln() * q).exp()).sum();
    (q * top.ln() + rest.ln() - q.ln()).exp()
}

fn combined(u: &PotentialVector, weights: &Weights) -> ScalarField {
    let mut s = ScalarField::zeros(u.u[0].side());
    for (ui, l) in u.u.iter().zip(weights.iter()) {
        s.axpy(l, ui);
    }
    s
}

/// The functional `J_ε`.
pub fn j_eps(u: &PotentialVector, samples: &[GridMeasure], weights: &Weights, params: &PLaplaceParams) -> Result<f64> {
    validate_inputs(u, samples, weights)?;
    Ok(j_value(u, samples, weights, params))
}

fn j_value(u: &PotentialVector, samples: &[GridMeasure], weights: &Weights, params: &PLaplaceParams) -> f64 {
    let power: f64 = u
        .u
        .par_iter()
        .map(|ui| power_sum(&grad_h(ui).magnitudes(), params.exponent))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let penalty: f64 = combined(u, weights)
        .as_slice()
        .iter()
        .map(|s| s.max(0.0).powi(2))
        .sum::<f64>()
        / (2.0 * params.epsilon);
    let linear: f64 = u
        .u
        .iter()
        .zip(samples)
        .zip(weights.iter())
        .map(|((ui, s), l)| l * ui.dot(s.field()))
        .sum();
    power + penalty - linear
}

/// `‖∇u‖^{q-2} ∇u`, cell by cell.
fn flux(u: &ScalarField, q: f64) -> FlowField {
    let mut g = grad_h(u);
    let mags = g.magnitudes();
    let (vx, vy) = g.components_mut();
    for ((x, y), m) in vx.iter_mut().zip(vy.iter_mut()).zip(mags.as_slice()) {
        let f = if *m == 0.0 {
            if q == 2.0 { 1.0 } else { 0.0 }
        } else if q > LOG_FORM_EXPONENT {
            ((q - 2.0) * m.ln()).exp()
        } else {
            m.powf(q - 2.0)
        };
        *x *= f;
        *y *= f;
    }
    g
}

/// `∂J_ε/∂u_i = -div(‖∇u_i‖^{p-2}∇u_i) + λ_i ν^ε - λ_i ν_i`, the cell-wise
/// residual of the weak optimality system tested against cell indicators.
pub fn j_eps_gradient(
    u: &PotentialVector,
    samples: &[GridMeasure],
    weights: &Weights,
    params: &PLaplaceParams,
) -> Result<PotentialVector> {
    let p = validate_inputs(u, samples, weights)?;
    Ok(gradient(u, samples, weights, params, p))
}

fn gradient(u: &PotentialVector, samples: &[GridMeasure], weights: &Weights, params: &PLaplaceParams, p: usize) -> PotentialVector {
    let mut nu_eps = combined(u, weights);
    for v in nu_eps.as_mut_slice() {
        *v = v.max(0.0) / params.epsilon;
    }
    let grads = u
        .u
        .par_iter()
        .zip(samples)
        .zip(weights.as_slice())
        .map(|((ui, s), l)| {
            let mut g = ScalarField::zeros(p);
            div_into(&flux(ui, params.exponent), &mut g);
            g.scale(-1.0);
            g.axpy(*l, &nu_eps);
            g.axpy(-l, s.field());
            g
        })
        .collect();
    PotentialVector { u: grads }
}

/// Hessian of `J_ε` at `u` applied to `v`.
fn hessian_product(u: &PotentialVector, v: &PotentialVector, weights: &Weights, params: &PLaplaceParams, p: usize) -> PotentialVector {
    let q = params.exponent;
    let active = combined(u, weights);
    let dir = combined(v, weights);
    let out = u
        .u
        .par_iter()
        .zip(&v.u)
        .zip(weights.as_slice())
        .map(|((ui, vi), l)| {
            // d/dt of ‖g‖^{q-2} g along g + t w is ‖g‖^{q-2} (w + (q-2)(ĝ·w) ĝ).
            let mut g = grad_h(ui);
            let w = grad_h(vi);
            let (gx, gy) = g.components_mut();
            for ((x, y), (wx, wy)) in gx.iter_mut().zip(gy.iter_mut()).zip(w.vx().iter().zip(w.vy())) {
                let m = x.hypot(*y);
                let (hx, hy) = if m == 0.0 {
                    if q == 2.0 { (*wx, *wy) } else { (0.0, 0.0) }
                } else {
                    let a = if q > LOG_FORM_EXPONENT { ((q - 2.0) * m.ln()).exp() } else { m.powf(q - 2.0) };
                    let (ux, uy) = (*x / m, *y / m);
                    let c = (q - 2.0) * (ux * wx + uy * wy);
                    (a * (wx + c * ux), a * (wy + c * uy))
                };
                *x = hx;
                *y = hy;
            }
            let mut r = ScalarField::zeros(p);
            div_into(&g, &mut r);
            r.scale(-1.0);
            for ((rc, s), d) in r.as_mut_slice().iter_mut().zip(active.as_slice()).zip(dir.as_slice()) {
                if *s > 0.0 {
                    *rc += l * d / params.epsilon;
                }
            }
            r
        })
        .collect();
    PotentialVector { u: out }
}

/// Approximate solution of `(H + μI) d = -g` on the normalization's tangent
/// space by conjugate gradients, stopped at relative residual
/// `min(½, √‖g‖)`.
fn newton_direction(
    u: &PotentialVector,
    grad: &PotentialVector,
    gnorm: f64,
    damping: f64,
    weights: &Weights,
    params: &PLaplaceParams,
    p: usize,
) -> PotentialVector {
    let target = gnorm * gnorm.sqrt().min(0.5);
    let mut d = grad.scaled(0.0);
    let mut r = grad.scaled(-1.0);
    let mut dir = r.clone();
    let mut rr = r.dot(&r);
    for _ in 0..params.max_cg {
        let mut hd = hessian_product(u, &dir, weights, params, p);
        project_tangent(&mut hd);
        hd.axpy(damping, &dir);
        let curv = dir.dot(&hd);
        if !(curv > 0.0) {
            break;
        }
        let alpha = rr / curv;
        d.axpy(alpha, &dir);
        r.axpy(-alpha, &hd);
        let next = r.dot(&r);
        if next.sqrt() <= target {
            break;
        }
        let mut nd = r.clone();
        nd.axpy(next / rr, &dir);
        dir = nd;
        rr = next;
    }
    if d.dot(&d) == 0.0 {
        // Curvature test failed on the first direction: steepest descent.
        return grad.scaled(-1.0);
    }
    d
}

/// Removes the mean of the first `N-1` components (the tangent space of
/// the normalization).
fn project_tangent(g: &mut PotentialVector) {
    let n = g.u.len();
    for gi in &mut g.u[..n - 1] {
        let m = gi.mean();
        gi.add_constant(-m);
    }
}

/// Flows `σ_i = ‖∇u_i‖^{p-2}∇u_i / λ_i` and `ν^ε = (Σ_j λ_j u_j)₊ / ε`.
pub fn extract_eps_quantities(
    u: &PotentialVector,
    params: &PLaplaceParams,
    weights: &Weights,
) -> Result<(Vec<FlowField>, ScalarField)> {
    weights.require_len(u.u.len())?;
    let flows = u
        .u
        .iter()
        .zip(weights.iter())
        .map(|(ui, l)| {
            let mut f = flux(ui, params.exponent);
            f.scale(1.0 / l);
            f
        })
        .collect();
    let mut nu = combined(u, weights);
    for v in nu.as_mut_slice() {
        *v = v.max(0.0) / params.epsilon;
    }
    Ok((flows, nu))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLaplaceReport {
    pub epsilon: f64,
    pub exponent: f64,
    pub iterations: usize,
    pub converged: bool,
    pub j_value: f64,
    /// `J_ε` after every accepted step, starting from the initial point.
    pub j_history: Vec<f64>,
    /// Norm of the gradient projected onto the normalization's tangent space.
    pub projected_gradient_norm: f64,
    /// Per component, the largest weak-form residual over cell indicators.
    pub weak_residual_max: Vec<f64>,
    /// Per component, `‖-div σ_i + ν^ε - ν_i‖₂`.
    pub flux_residual: Vec<f64>,
    /// `Σ_c ν^ε`.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLaplaceSolution {
    pub potentials: PotentialVector,
    pub flows: Vec<FlowField>,
    pub nu_eps: ScalarField,
    pub report: PLaplaceReport,
}

/// Minimizes `J_ε` from `u = 0`; see [`minimize_j_eps_from`].
pub fn minimize_j_eps(samples: &[GridMeasure], weights: &Weights, params: &PLaplaceParams) -> Result<PLaplaceSolution> {
    let p = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("no samples".into()))?
        .side();
    minimize_j_eps_from(PotentialVector::zeros(p, samples.len()), samples, weights, params)
}

/// Minimizes `J_ε` from `start` by Levenberg–Marquardt damped truncated
/// Newton steps: `(H + μI) d = -g` is solved approximately by conjugate
/// gradients on exact Hessian products. A step is accepted only if it meets
/// the Armijo condition, so `J_ε` decreases at every accepted step; `μ`
/// grows on rejection and adapts to the model's predictive quality
/// otherwise. All iterates keep the normalization.
pub fn minimize_j_eps_from(
    start: PotentialVector,
    samples: &[GridMeasure],
    weights: &Weights,
    params: &PLaplaceParams,
) -> Result<PLaplaceSolution> {
    params.validate()?;
    weights.require_positive()?;
    let mut u = start;
    let p = validate_inputs(&u, samples, weights)?;
    u.normalize(weights);

    let mut value = j_value(&u, samples, weights, params);
    let mut grad = gradient(&u, samples, weights, params, p);
    project_tangent(&mut grad);
    let mut history = vec![value];
    let mut iterations = 0;
    let mut gnorm = grad.dot(&grad).sqrt();
    let mut damping = 1e-2;
    let mut rejected = 0;
    while gnorm > params.tol && iterations < params.max_iter {
        let d = newton_direction(&u, &grad, gnorm, damping, weights, params, p);
        let slope = grad.dot(&d);
        // CG iterates minimize the damped quadratic model, whose value at
        // `d` is then `½ gᵀd`.
        let predicted = -0.5 * slope;
        let mut trial = u.clone();
        trial.axpy(1.0, &d);
        let v = j_value(&trial, samples, weights, params);
        if !(v.is_finite() && v <= value + params.armijo * slope) {
            damping *= 1.0 / params.backtrack;
            rejected += 1;
            if rejected > 60 {
                // No decrease representable in floating point: the iterate
                // is stationary to working precision.
                break;
            }
            continue;
        }
        rejected = 0;
        let ratio = (value - v) / predicted;
        if ratio > 0.75 {
            damping = (damping * params.backtrack).max(1e-14);
        } else if ratio < 0.25 {
            damping /= params.backtrack;
        }
        u = trial;
        value = v;
        grad = gradient(&u, samples, weights, params, p);
        project_tangent(&mut grad);
        gnorm = grad.dot(&grad).sqrt();
        history.push(value);
        iterations += 1;
    }

    let converged = gnorm <= params.tol;
    let raw = gradient(&u, samples, weights, params, p);
    let (flows, nu_eps) = extract_eps_quantities(&u, params, weights)?;
    let mut d = ScalarField::zeros(p);
    let flux_residual = flows
        .iter()
        .zip(samples)
        .map(|(f, s)| {
            div_into(f, &mut d);
            d.scale(-1.0);
            d.axpy(1.0, &nu_eps);
            d.axpy(-1.0, s.field());
            d.norm()
        })
        .collect();
    let report = PLaplaceReport {
        epsilon: params.epsilon,
        exponent: params.exponent,
        iterations,
        converged,
        j_value: value,
        j_history: history,
        projected_gradient_norm: gnorm,
        weak_residual_max: raw.u.iter().map(ScalarField::max_abs).collect(),
        flux_residual,
        mass: nu_eps.sum(),
    };
    let solution = PLaplaceSolution { potentials: u, flows, nu_eps, report };
    if converged {
        Ok(solution)
    } else {
        Err(Error::PLaplaceNoConvergence(Box::new(solution)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(p: usize, ci: f64, cj: f64, r: f64) -> GridMeasure {
        GridMeasure::from_density(ScalarField::from_fn(p, |i, j| {
            let d = ((i as f64 - ci).powi(2) + (j as f64 - cj).powi(2)).sqrt();
            (r - d).max(0.0)
        }))
        .unwrap()
    }

    fn random_potentials(p: usize, n: usize, seed: u64) -> PotentialVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PotentialVector {
            u: (0..n).map(|_| ScalarField::from_fn(p, |_, _| rng.gen_range(-1.0..1.0))).collect(),
        }
    }

    #[test]
    fn zero_potentials_give_zero() {
        let s = vec![blob(6, 2.0, 2.0, 2.0), blob(6, 3.0, 4.0, 2.0)];
        let w = Weights::uniform(2);
        let params = PLaplaceParams::default();
        let u = PotentialVector::zeros(6, 2);
        assert_eq!(j_eps(&u, &s, &w, &params).unwrap(), 0.0);
        let (flows, nu) = extract_eps_quantities(&u, &params, &w).unwrap();
        assert!(flows.iter().all(|f| f.norm() == 0.0));
        assert_eq!(nu.max_abs(), 0.0);
    }

    #[test]
    fn penalty_vanishes_for_nonpositive_combinations() {
        let s = vec![blob(5, 2.0, 2.0, 2.0), blob(5, 1.0, 3.0, 2.0)];
        let w = Weights::uniform(2);
        let params = PLaplaceParams { epsilon: 1e-6, ..PLaplaceParams::default() };
        let mut u = random_potentials(5, 2, 3);
        for ui in &mut u.u {
            let m = ui.max();
            ui.add_constant(-m - 0.1);
        }
        let expected: f64 = u
            .u
            .iter()
            .map(|ui| power_sum(&grad_h(ui).magnitudes(), params.exponent))
            .sum::<f64>()
            - u.u.iter().zip(&s).zip(w.iter()).map(|((ui, si), l)| l * ui.dot(si.field())).sum::<f64>();
        assert!((j_eps(&u, &s, &w, &params).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn quadratic_exponent_gives_plain_gradients() {
        let w = Weights::new(vec![0.25, 0.75]).unwrap();
        let u = random_potentials(6, 2, 9);
        let params = PLaplaceParams { exponent: 2.0, ..PLaplaceParams::default() };
        let (flows, _) = extract_eps_quantities(&u, &params, &w).unwrap();
        for ((f, ui), l) in flows.iter().zip(&u.u).zip(w.iter()) {
            let mut g = grad_h(ui);
            g.scale(1.0 / l);
            assert_eq!(f, &g);
        }
    }

    #[test]
    fn log_form_matches_direct_powers() {
        let m = ScalarField::from_fn(4, |i, j| 0.1 + 0.2 * (i + j) as f64);
        for q in [9.0, 12.0, 16.0] {
            let direct = m.as_slice().iter().map(|v| v.powf(q)).sum::<f64>() / q;
            assert!((power_sum(&m, q) - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = 5;
        let s = vec![blob(p, 1.0, 1.0, 2.0), blob(p, 3.0, 3.0, 2.0), blob(p, 1.0, 3.0, 1.5)];
        let w = Weights::new(vec![0.2, 0.3, 0.5]).unwrap();
        for (exponent, epsilon) in [(2.0, 0.5), (4.0, 0.1), (8.0, 0.05), (16.0, 0.01)] {
            let params = PLaplaceParams { exponent, epsilon, ..PLaplaceParams::default() };
            let mut u = random_potentials(p, 3, 17);
            // Keep magnitudes moderate so the high powers stay well scaled.
            u.u.iter_mut().for_each(|ui| ui.scale(0.3));
            let g = j_eps_gradient(&u, &s, &w, &params).unwrap();
            for k in 0..3 {
                for c in [0, 7, 12, 24] {
                    let h = 1e-6;
                    let mut up = u.clone();
                    up.u[k].as_mut_slice()[c] += h;
                    let mut dn = u.clone();
                    dn.u[k].as_mut_slice()[c] -= h;
                    let fd = (j_eps(&up, &s, &w, &params).unwrap() - j_eps(&dn, &s, &w, &params).unwrap()) / (2.0 * h);
                    let an = g.u[k].as_slice()[c];
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "p={exponent} k={k} c={c}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let p = 5;
        let s = vec![blob(p, 1.0, 1.0, 2.0), blob(p, 3.0, 3.0, 2.0)];
        let w = Weights::new(vec![0.4, 0.6]).unwrap();
        for exponent in [2.0, 3.0, 4.0, 16.0] {
            let params = PLaplaceParams { exponent, epsilon: 0.1, ..PLaplaceParams::default() };
            let mut u = random_potentials(p, 2, 21);
            u.u.iter_mut().for_each(|ui| ui.scale(0.3));
            let v = random_potentials(p, 2, 22);
            let hv = hessian_product(&u, &v, &w, &params, p);
            let h = 1e-6;
            let mut up = u.clone();
            up.axpy(h, &v);
            let mut dn = u.clone();
            dn.axpy(-h, &v);
            let gp = j_eps_gradient(&up, &s, &w, &params).unwrap();
            let gd = j_eps_gradient(&dn, &s, &w, &params).unwrap();
            let mut err = gp.scaled(0.5 / h);
            err.axpy(-0.5 / h, &gd);
            err.axpy(-1.0, &hv);
            assert!(err.dot(&err).sqrt() <= 1e-5 * hv.dot(&hv).sqrt(), "p={exponent}");
        }
    }

    #[test]
    fn gauge_shifts_leave_j_unchanged() {
        let p = 6;
        let s = vec![blob(p, 2.0, 2.0, 2.0), blob(p, 4.0, 3.0, 2.0), blob(p, 1.0, 4.0, 2.0)];
        let w = Weights::new(vec![0.5, 0.3, 0.2]).unwrap();
        let params = PLaplaceParams::default();
        let u = random_potentials(p, 3, 5);
        // Constants α with Σ λ_j α_j = 0.
        let alpha = [0.3, -0.2, -0.45];
        let mut shifted = u.clone();
        for (ui, a) in shifted.u.iter_mut().zip(alpha) {
            ui.add_constant(a);
        }
        let a = j_eps(&u, &s, &w, &params).unwrap();
        let b = j_eps(&shifted, &s, &w, &params).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn normalization_preserves_the_combination() {
        let w = Weights::new(vec![0.5, 0.3, 0.2]).unwrap();
        let mut u = random_potentials(5, 3, 11);
        let before = combined(&u, &w);
        u.normalize(&w);
        assert!(u.u[..2].iter().all(|ui| ui.mean().abs() < 1e-12));
        assert!(combined(&u, &w).sub(&before).max_abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_the_sample_back() {
        let p = 8;
        let rho = blob(p, 3.5, 3.5, 3.0);
        let s = vec![rho.clone(); 3];
        let w = Weights::uniform(3);
        let params = PLaplaceParams { epsilon: 1e-4, exponent: 4.0, ..PLaplaceParams::default() };
        let sol = minimize_j_eps(&s, &w, &params).unwrap();
        assert!(sol.nu_eps.sub(rho.field()).max_abs() < 1e-3);
        assert!(sol.flows.iter().all(|f| f.l12_norm() < 1e-2));
        assert!(sol.report.j_history.windows(2).all(|v| v[1] <= v[0]));
        assert!((sol.report.mass - 1.0).abs() < 1e-4);
        assert!(sol.report.flux_residual.iter().all(|r| *r < 1e-6));
    }
}
