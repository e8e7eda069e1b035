//! Acceptance suite. Every criterion prints one PASS or FAIL line; the run
//! fails when any criterion fails. Criteria run sequentially so the runtime
//! limits are measured without interference.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmedian::dr::{solve_median, DrParams, MedianSolution, Relaxation};
use wmedian::experiments::{
    blob, breakdown_sweep_1d, breakdown_sweep_2d, clustered_blobs, perturb_1d,
    quadrilateral_counterexample, quadrilateral_samples, random_atomic, random_histogram,
    stability_probe_1d, uniform_edges, Regime,
};
use wmedian::geom::{
    convex_hull, grid_w1_bounds, hull_distance, moment_bound_check, weiszfeld, Point, PointCloud,
};
use wmedian::grid2d::{
    div_h, grad_h, laplacian_h, solve_neumann_poisson, solve_shifted, FlowField, GridMeasure,
    PoissonBackend, ScalarField, TensorSolver,
};
use wmedian::median1d::{
    dispersion, horizontal_selection, verify_median_1d, vertical_selection, w1_1d, w1_1d_quantile,
    Measure1D,
};
use wmedian::plaplace::{
    j_eps, j_eps_gradient, minimize_j_eps_from, PLaplaceParams, PotentialVector,
};
use wmedian::prox::{constraint_residuals, project_flows, FlowProjector, FlowTuple};
use wmedian::{Error, Weights};

type Outcome = (bool, String);

/// A grid median kept for the moment and hull checks.
struct MomentCase {
    name: &'static str,
    median: PointCloud,
    samples: Vec<PointCloud>,
    h: f64,
}

#[derive(Default)]
struct Suite {
    results: Vec<(String, bool)>,
    moment_cases: Vec<MomentCase>,
}

impl Suite {
    fn run(&mut self, name: &str, f: impl FnOnce(&mut Vec<MomentCase>) -> Outcome) {
        let start = Instant::now();
        let cases = &mut self.moment_cases;
        let (passed, detail) = match catch_unwind(AssertUnwindSafe(|| f(cases))) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        println!(
            "{} {name}: {detail} ({:.1} s)",
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        self.results.push((name.to_string(), passed));
    }
}

fn main() {
    // Ignore the arguments the test runner passes to custom harnesses, but
    // honour `--list` so listing tests does not run the suite.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut suite = Suite::default();
    suite.run("one-dimensional exactness", |_| one_dimensional_exactness());
    suite.run("one-dimensional density bounds", |_| density_bounds());
    suite.run("Lipschitz stability of the selections", |_| lipschitz_stability());
    suite.run("grid operator calculus", |_| operator_calculus());
    suite.run("flow projection", |_| flow_projection());
    suite.run("Douglas-Rachford convergence", dr_convergence);
    suite.run("threshold effect", threshold_effect);
    suite.run("quadrilateral counterexample", quadrilateral);
    suite.run("breakdown point", breakdown);
    suite.run("p-Laplace approximation", p_laplace);
    suite.run("moment and hull bounds", moment_bounds);
    suite.run("geometric median certificates", geometric_median_certificates);

    let failed: Vec<&str> = suite.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        suite.results.len() - failed.len(),
        suite.results.len()
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join("; "));
        std::process::exit(1);
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_weights(rng: &mut impl Rng, n: usize) -> Weights {
    Weights::normalized((0..n).map(|_| rng.gen_range(0.05..1.0)).collect()).unwrap()
}

/// Atomic sample whose atoms sit on integers half of the time, so that
/// coincident atoms across samples are common.
fn atomic_sample(rng: &mut impl Rng) -> Measure1D {
    let atoms = rng.gen_range(1..=50);
    let m = random_atomic(rng, atoms, 10.0).unwrap();
    if rng.gen_bool(0.5) {
        let (xs, ws): (Vec<f64>, Vec<f64>) = m.atoms().into_iter().map(|(x, w)| (x.round(), w)).unzip();
        Measure1D::from_atoms(&xs, &ws).unwrap()
    } else {
        m
    }
}

fn one_dimensional_exactness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst_spread = 0.0f64;
    let mut checks = 0usize;
    for inst in 0..200 {
        let n = r.gen_range(1..=7);
        let samples: Vec<Measure1D> = (0..n).map(|_| atomic_sample(&mut r)).collect();
        let w = random_weights(&mut r, n);
        let mut selections = Vec::new();
        for theta in [0.0, 0.5, 1.0] {
            selections.push(vertical_selection(&w, &samples, theta).unwrap());
            selections.push(horizontal_selection(&w, &samples, theta).unwrap());
        }
        for s in &selections {
            if !verify_median_1d(&w, &samples, s, 1e-12).unwrap() {
                return (false, format!("instance {inst}: a selection fails verification"));
            }
        }
        let d: Vec<f64> = selections.iter().map(|s| dispersion(&w, &samples, s).unwrap()).collect();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |a, v| (a.0.min(*v), a.1.max(*v)));
        worst_spread = worst_spread.max(hi - lo);
        if hi - lo > 1e-10 {
            return (false, format!("instance {inst}: dispersions differ by {:e}", hi - lo));
        }
        for k in 0..50 {
            let base = &selections[k % selections.len()];
            let probe = match k % 4 {
                0 => {
                    let atoms = r.gen_range(1..=10);
                    random_atomic(&mut r, atoms, 10.0).unwrap()
                }
                1 => base.mixture(&samples[r.gen_range(0..n)], r.gen_range(0.0..=1.0)).unwrap(),
                2 => base.translate(r.gen_range(-0.5..0.5)),
                _ => samples[r.gen_range(0..n)].clone(),
            };
            let dp = dispersion(&w, &samples, &probe).unwrap();
            checks += 1;
            if dp < lo - 1e-10 {
                return (false, format!("instance {inst}: probe beats the median by {:e}", lo - dp));
            }
        }
    }
    let elapsed = start.elapsed();
    (
        elapsed < Duration::from_secs(5),
        format!(
            "200 instances, 1200 selections verified, {checks} probes, dispersion spread ≤ {worst_spread:.1e}, runtime {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Per-bin densities of a measure on the uniform bins of `edges`.
fn bin_densities(m: &Measure1D, edges: &[f64]) -> Vec<f64> {
    edges
        .windows(2)
        .map(|e| (m.cdf(e[1]) - m.cdf(e[0])) / (e[1] - e[0]))
        .collect()
}

fn density_bounds() -> Outcome {
    let start = Instant::now();
    let bins = 256;
    let edges = uniform_edges(0.0, 1.0, bins);
    let width = 1.0 / bins as f64;
    let mut r = rng(2);
    let mut pieces = 0usize;
    for inst in 0..50 {
        let n = r.gen_range(2..=7);
        let samples: Vec<Measure1D> = (0..n).map(|_| random_histogram(&mut r, &edges).unwrap()).collect();
        let w = random_weights(&mut r, n);
        let dens: Vec<Vec<f64>> = samples.iter().map(|s| bin_densities(s, &edges)).collect();
        let lo: Vec<f64> = (0..bins).map(|k| dens.iter().map(|d| d[k]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..bins).map(|k| dens.iter().map(|d| d[k]).fold(0.0, f64::max)).collect();
        let top = hi.iter().copied().fold(0.0, f64::max);
        let tol = 1e-9 * top;
        let no_atoms = |m: &Measure1D, what: &str| -> Result<(), String> {
            match m.atoms().is_empty() {
                true => Ok(()),
                false => Err(format!("instance {inst}: {what} has atoms")),
            }
        };
        // Every density piece against the bins it overlaps.
        let check_exact = |m: &Measure1D, what: &str| -> Result<(), String> {
            no_atoms(m, what)?;
            for (a, b, d) in m.density_pieces() {
                let k0 = (a / width).floor().max(0.0) as usize;
                let k1 = ((b / width).ceil() as usize).min(bins);
                let inside: Vec<usize> =
                    (k0..k1).filter(|&k| b.min(edges[k + 1]) - a.max(edges[k]) > 1e-12 * width).collect();
                let l = inside.iter().map(|&k| lo[k]).fold(f64::INFINITY, f64::min);
                let h = inside.iter().map(|&k| hi[k]).fold(0.0, f64::max);
                if d < l - tol || d > h + tol {
                    return Err(format!("instance {inst}: {what} density {d} outside [{l}, {h}] on [{a}, {b}]"));
                }
            }
            Ok(())
        };
        // Every bin density against the bounds of the bin and its neighbours.
        let check_slack = |m: &Measure1D, what: &str| -> Result<(), String> {
            no_atoms(m, what)?;
            for (k, d) in bin_densities(m, &edges).into_iter().enumerate() {
                let near = k.saturating_sub(1)..(k + 2).min(bins);
                let l = near.clone().map(|j| lo[j]).fold(f64::INFINITY, f64::min);
                let h = near.map(|j| hi[j]).fold(0.0, f64::max);
                if d < l - tol || d > h + tol {
                    return Err(format!("instance {inst}: {what} density {d} outside [{l}, {h}] in bin {k}"));
                }
            }
            Ok(())
        };
        for theta in [0.0, 0.5, 1.0] {
            let v = vertical_selection(&w, &samples, theta).unwrap();
            pieces += v.density_pieces().len();
            if let Err(e) = check_exact(&v, "vertical selection") {
                return (false, e);
            }
        }
        for theta in [0.0, 1.0] {
            let h = horizontal_selection(&w, &samples, theta).unwrap();
            if let Err(e) = check_slack(&h, "horizontal selection") {
                return (false, e);
            }
        }
    }
    let elapsed = start.elapsed();
    (
        elapsed < Duration::from_secs(5),
        format!("50 instances on 256 bins: {pieces} vertical density pieces within bounds, horizontal bins within one bin of slack, runtime {:.2} s", elapsed.as_secs_f64()),
    )
}

fn lipschitz_stability() -> Outcome {
    let mut r = rng(3);
    let edges = uniform_edges(-1.0, 1.0, 24);
    let mut pairs = 0usize;
    let mut worst_ratio = 0.0f64;
    while pairs < 100 {
        let n = r.gen_range(2..=6);
        let samples: Vec<Measure1D> = (0..n)
            .map(|_| {
                if r.gen_bool(0.5) {
                    random_histogram(&mut r, &edges).unwrap()
                } else {
                    let atoms = r.gen_range(1..=12);
                    random_atomic(&mut r, atoms, 1.0).unwrap()
                }
            })
            .collect();
        let w = random_weights(&mut r, n);
        let scale = r.gen_range(0.01..1.0);
        let perturbed: Vec<Measure1D> = samples.iter().map(|s| perturb_1d(&mut r, s, scale).unwrap()).collect();
        let rhs: f64 = samples.iter().zip(&perturbed).map(|(a, b)| w1_1d(a, b)).sum();
        let rhs_q: f64 = samples.iter().zip(&perturbed).map(|(a, b)| w1_1d_quantile(a, b)).sum();
        if (rhs - rhs_q).abs() > 1e-9 * rhs.max(1.0) {
            return (false, format!("pair {pairs}: W₁ formulas disagree ({rhs} vs {rhs_q})"));
        }
        for theta in [0.0, 0.5, 1.0, r.gen_range(0.0..=1.0)] {
            let moves = [
                w1_1d(
                    &vertical_selection(&w, &samples, theta).unwrap(),
                    &vertical_selection(&w, &perturbed, theta).unwrap(),
                ),
                w1_1d(
                    &horizontal_selection(&w, &samples, theta).unwrap(),
                    &horizontal_selection(&w, &perturbed, theta).unwrap(),
                ),
            ];
            for m in moves {
                worst_ratio = worst_ratio.max(m / rhs);
                if m > rhs * (1.0 + 1e-12) {
                    return (false, format!("pair {pairs}: movement {m} exceeds {rhs}"));
                }
            }
        }
        pairs += 1;
    }
    // The harness entry point gives the same verdict.
    let mut r = rng(30);
    let samples: Vec<Measure1D> = (0..4).map(|_| random_histogram(&mut r, &edges).unwrap()).collect();
    let probe = stability_probe_1d(&samples, &Weights::uniform(4), 0.3, 0.5, 20, 31).unwrap();
    (
        probe.all_hold,
        format!("100 pairs x 4 values of θ x 2 selections, largest movement/perturbation ratio {worst_ratio:.3}"),
    )
}

fn random_field(r: &mut impl Rng, p: usize) -> ScalarField {
    ScalarField::from_fn(p, |_, _| r.gen_range(-1.0..1.0))
}

fn random_flow(r: &mut impl Rng, p: usize) -> FlowField {
    let vx = (0..p * p).map(|_| r.gen_range(-1.0..1.0)).collect();
    let vy = (0..p * p).map(|_| r.gen_range(-1.0..1.0)).collect();
    FlowField::new(p, vx, vy).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn operator_calculus() -> Outcome {
    let mut r = rng(4);
    let mut worst_dense = 0.0f64;
    let mut worst_adjoint = 0.0f64;
    for p in 2..=8 {
        for _ in 0..5 {
            let u = random_field(&mut r, p);
            let s = random_flow(&mut r, p);
            // Dense oracle written from the stencil definitions.
            let at = |f: &ScalarField, i: usize, j: usize| f.get(i, j);
            let mut gx = vec![0.0; p * p];
            let mut gy = vec![0.0; p * p];
            let mut div = vec![0.0; p * p];
            for i in 0..p {
                for j in 0..p {
                    let c = i * p + j;
                    if i + 1 < p {
                        gx[c] = at(&u, i + 1, j) - at(&u, i, j);
                        // σ_x(i, j) enters cell (i + 1, j) and leaves (i, j).
                        div[c] -= s.vx()[c];
                        div[c + p] += s.vx()[c];
                    }
                    if j + 1 < p {
                        gy[c] = at(&u, i, j + 1) - at(&u, i, j);
                        div[c] -= s.vy()[c];
                        div[c + 1] += s.vy()[c];
                    }
                }
            }
            // The divergence is the negative adjoint of the gradient.
            let div: Vec<f64> = div.iter().map(|v| -v).collect();
            let g = grad_h(&u);
            let mut lap = vec![0.0; p * p];
            let gu = FlowField::new(p, gx.clone(), gy.clone()).unwrap();
            let dgu = div_h(&gu);
            lap.copy_from_slice(dgu.as_slice());
            worst_dense = worst_dense
                .max(max_diff(g.vx(), &gx))
                .max(max_diff(g.vy(), &gy))
                .max(max_diff(div_h(&s).as_slice(), &div))
                .max(max_diff(laplacian_h(&u).as_slice(), &lap));
            let lhs = g.dot(&s);
            let rhs = -u.dot(&div_h(&s));
            worst_adjoint = worst_adjoint.max((lhs - rhs).abs());
        }
    }
    // The stencil oracle must agree with the minus-transpose definition:
    // check Δ on a single bump against the five-point formula.
    let mut bump = ScalarField::zeros(5);
    bump.set(2, 2, 1.0);
    let five_point = laplacian_h(&bump);
    let stencil_ok = five_point.get(2, 2) == -4.0 && five_point.get(1, 2) == 1.0 && five_point.get(2, 3) == 1.0;

    let p = 64;
    let mut u = random_field(&mut r, p);
    let m = u.mean();
    u.add_constant(-m);
    let mut b = laplacian_h(&u);
    b.scale(-1.0);
    let direct = TensorSolver::poisson(p).unwrap().solve(&b).unwrap();
    let cg = solve_neumann_poisson(&b, 1e-14, 20_000).unwrap();
    let poisson_err = max_diff(direct.as_slice(), u.as_slice()).max(max_diff(cg.as_slice(), u.as_slice()));
    let n = 3;
    let z = random_field(&mut r, p);
    let mut bz = laplacian_h(&z);
    bz.scale(-1.0 / n as f64);
    bz.axpy(1.0, &z);
    let direct = TensorSolver::shifted(p, n).unwrap().solve(&bz).unwrap();
    let cg = solve_shifted(&bz, n, 1e-14, 20_000).unwrap();
    let shifted_err = max_diff(direct.as_slice(), z.as_slice()).max(max_diff(cg.as_slice(), z.as_slice()));
    let passed = worst_dense <= 1e-10 && worst_adjoint <= 1e-10 && stencil_ok && poisson_err <= 1e-8 && shifted_err <= 1e-8;
    (
        passed,
        format!(
            "dense oracle {worst_dense:.1e}, adjointness {worst_adjoint:.1e} on 2 ≤ p ≤ 8; p = 64 Poisson error {poisson_err:.1e}, shifted error {shifted_err:.1e}"
        ),
    )
}

fn random_tuple(r: &mut impl Rng, p: usize, n: usize) -> FlowTuple {
    FlowTuple {
        flows: (0..n).map(|_| random_flow(r, p)).collect(),
        measure: random_field(r, p),
    }
}

fn flow_projection() -> Outcome {
    let mut r = rng(5);
    let (p, n) = (64, 3);
    let samples: Vec<GridMeasure> = (0..n).map(|_| wmedian::experiments::random_blob(&mut r, p).unwrap()).collect();
    let x = random_tuple(&mut r, p, n);
    let y = random_tuple(&mut r, p, n);
    let mut worst = [0.0f64; 4];
    let mut run = |px: &FlowTuple, py: &FlowTuple, ppx: &FlowTuple, feasible: &FlowTuple| {
        let res = constraint_residuals(&px.flows, &samples, &px.measure)
            .into_iter()
            .chain(constraint_residuals(&py.flows, &samples, &py.measure))
            .fold(0.0, f64::max);
        let idem = ppx.distance_sq(px).sqrt();
        let expansion = py.distance_sq(px).sqrt() - y.distance_sq(&x).sqrt();
        // The projection is the nearest feasible point.
        let optimality = x.distance_sq(px).sqrt() - x.distance_sq(feasible).sqrt();
        worst[0] = worst[0].max(res);
        worst[1] = worst[1].max(idem);
        worst[2] = worst[2].max(expansion);
        worst[3] = worst[3].max(optimality);
    };
    let px = project_flows(&x, &samples, 1e-13).unwrap();
    let py = project_flows(&y, &samples, 1e-13).unwrap();
    let ppx = project_flows(&px, &samples, 1e-13).unwrap();
    run(&px, &py, &ppx, &py);
    let mut direct = FlowProjector::new(p, n, PoissonBackend::Direct, 1e-12).unwrap();
    let dx = direct.project(&x, &samples).unwrap();
    let dy = direct.project(&y, &samples).unwrap();
    let ddx = direct.project(&dx, &samples).unwrap();
    run(&dx, &dy, &ddx, &dy);
    let agree = dx.distance_sq(&px).sqrt();
    let passed = worst[0] <= 1e-8 && worst[1] <= 1e-8 && worst[2] <= 1e-8 && worst[3] <= 1e-8 && agree <= 1e-8;
    (
        passed,
        format!(
            "p = 64, N = 3: constraint residual {:.1e}, idempotence {:.1e}, expansion {:.1e}, nearest-point excess {:.1e}, backends differ by {agree:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

/// Median mass allowed beyond one cell of the samples' hull. The iterates
/// leave a thin residue there whose mass shrinks as the solver tolerance
/// tightens.
const HULL_RESIDUE: f64 = 1e-3;

fn grid_case(name: &'static str, median: &GridMeasure, samples: &[GridMeasure], h: f64, origin: Point) -> MomentCase {
    MomentCase {
        name,
        median: PointCloud::from_grid(median, h, origin, 0.0).unwrap(),
        samples: samples.iter().map(|s| PointCloud::from_grid(s, h, origin, 0.0).unwrap()).collect(),
        h,
    }
}

/// Parameters for the grid acceptance runs. The residual scales with the
/// step size under unit grid spacing; a unit step reaches the tolerances
/// within the iteration budget.
fn acceptance_params(tol: f64) -> DrParams {
    DrParams {
        tau: 1.0,
        relaxation: Relaxation::Constant(1.0),
        tol,
        max_iter: 5000,
        ..DrParams::default()
    }
}

fn solve_kept(samples: &[GridMeasure], w: &Weights, params: &DrParams) -> MedianSolution {
    match solve_median(samples, w, params) {
        Ok(s) => s,
        Err(Error::MedianNoConvergence(s)) => *s,
        Err(e) => panic!("{e}"),
    }
}

fn row_measure(p: usize, row: usize, cells: &[usize]) -> GridMeasure {
    let mut f = ScalarField::zeros(p);
    for &i in cells {
        f.set(i, row, 1.0);
    }
    GridMeasure::from_density(f).unwrap()
}

/// The collinear row against the exact 1D optimum, then the larger grid.
fn dr_convergence(cases: &mut Vec<MomentCase>) -> Outcome {
    let (row_ok, row) = dr_collinear_row(cases);
    let (large_ok, large) = dr_large_grid(cases);
    (row_ok && large_ok, format!("{row}; 256 x 256 at the {large}"))
}

fn dr_collinear_row(cases: &mut Vec<MomentCase>) -> Outcome {
    let p = 128;
    let row = p / 2;
    let groups: [Vec<usize>; 3] = [(p / 8..p / 8 + 10).collect(), (p / 2..p / 2 + 4).collect(), vec![7 * p / 8]];
    let samples: Vec<GridMeasure> = groups.iter().map(|g| row_measure(p, row, g)).collect();
    let w = Weights::uniform(3);
    // The same measures on the line, with atoms at the cell indices.
    let line: Vec<Measure1D> = groups
        .iter()
        .map(|g| {
            let xs: Vec<f64> = g.iter().map(|&i| i as f64).collect();
            Measure1D::from_atoms(&xs, &vec![1.0; xs.len()]).unwrap()
        })
        .collect();
    let exact = dispersion(&w, &line, &vertical_selection(&w, &line, 0.5).unwrap()).unwrap();
    let start = Instant::now();
    let sol = solve_kept(&samples, &w, &acceptance_params(1e-7));
    let elapsed = start.elapsed();
    let rel = (sol.primal_value - exact).abs() / exact;
    cases.push(grid_case("collinear row", &sol.median, &samples, 1.0, [0.0, 0.0]));
    let passed = rel <= 0.01 && sol.converged && sol.final_residual <= 1e-7 && elapsed < Duration::from_secs(60);
    (
        passed,
        format!(
            "p = 128: primal {:.6} vs exact {exact:.6} (relative {rel:.1e}), residual {:.1e} after {} iterations, {:.1} s",
            sol.primal_value,
            sol.final_residual,
            sol.iterations,
            elapsed.as_secs_f64()
        ),
    )
}

fn dr_large_grid(cases: &mut Vec<MomentCase>) -> Outcome {
    let p = 256;
    let samples = vec![
        blob(p, [60.0, 70.0], 30.0).unwrap(),
        blob(p, [190.0, 90.0], 40.0).unwrap(),
        blob(p, [120.0, 200.0], 35.0).unwrap(),
    ];
    let w = Weights::uniform(3);
    let params = DrParams { tol: 1e-6, max_iter: 5000, ..DrParams::default() };
    let sol = solve_kept(&samples, &w, &params);
    cases.push(grid_case("256 x 256 blobs", &sol.median, &samples, 1.0, [0.0, 0.0]));
    (
        sol.converged && sol.final_residual <= 1e-6,
        format!(
            "default step size: residual {:.1e} after {} iterations, certified gap {:.1e} on primal {:.4}",
            sol.final_residual,
            sol.iterations,
            sol.certified_gap(),
            sol.primal_value
        ),
    )
}

fn threshold_effect(cases: &mut Vec<MomentCase>) -> Outcome {
    let p = 64;
    let rho = blob(p, [20.0, 20.0], 6.0).unwrap();
    let other = blob(p, [44.0, 40.0], 8.0).unwrap();
    let samples = vec![rho.clone(), rho.clone(), other];
    let w = Weights::new(vec![0.3, 0.3, 0.4]).unwrap();
    let sol = solve_kept(&samples, &w, &acceptance_params(1e-7));
    let b = grid_w1_bounds(&sol.median, &rho).unwrap();
    cases.push(grid_case("threshold effect", &sol.median, &samples, 1.0, [0.0, 0.0]));
    (
        b.upper <= 2.0,
        format!(
            "W₁(median, ρ) ≤ {:.2e} cells (lower bound {:.1e}), residual {:.1e}",
            b.upper, b.lower, sol.final_residual
        ),
    )
}

fn quadrilateral(cases: &mut Vec<MomentCase>) -> Outcome {
    let params = acceptance_params(1e-7);
    let mut ratios = Vec::new();
    let mut central = 0.0;
    let mut residuals = Vec::new();
    for eps in [0.3, 0.2, 0.1] {
        let (report, sol) = quadrilateral_counterexample(eps, 0.6, 128, &params).unwrap();
        if eps == 0.2 {
            central = report.central_mass_fraction;
            let inst = quadrilateral_samples(eps, 0.6, 128).unwrap();
            let origin = [-inst.half_width, -inst.half_width];
            cases.push(grid_case("quadrilateral", &sol.median, &inst.samples, inst.h, origin));
        }
        ratios.push(report.linf_ratio);
        residuals.push(report.solver.final_residual);
    }
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    (
        central >= 0.95 && increasing,
        format!(
            "ε = 0.2: {:.2}% of mass in the dilated centre; density ratio {:.2} → {:.2} → {:.2} for ε = 0.3, 0.2, 0.1; residuals {:.1e}, {:.1e}, {:.1e}",
            100.0 * central, ratios[0], ratios[1], ratios[2], residuals[0], residuals[1], residuals[2]
        ),
    )
}

fn breakdown(cases: &mut Vec<MomentCase>) -> Outcome {
    let mut r = rng(9);
    let displacements: Vec<f64> = std::iter::once(0.0).chain((0..=6).map(|k| 10f64.powi(k))).collect();
    let mut bounded = 0;
    let mut unbounded = 0;
    let mut worst_use = 0.0f64;
    for inst in 0..20 {
        for (n, corrupt) in [(3usize, vec![0usize]), (5, vec![1, 3]), (2, vec![1]), (3, vec![0, 2])] {
            let samples: Vec<Measure1D> = (0..n)
                .map(|_| {
                    let atoms = r.gen_range(1..=8);
                    random_atomic(&mut r, atoms, 1.0).unwrap()
                })
                .collect();
            let report = breakdown_sweep_1d(&samples, &Weights::uniform(n), &corrupt, &displacements).unwrap();
            if !report.passed {
                return (false, format!("1D instance {inst} (N = {n}, corrupt {corrupt:?}) fails"));
            }
            match report.regime {
                Regime::Bounded => {
                    bounded += 1;
                    let b = report.bound.unwrap();
                    worst_use = report.rows.iter().map(|row| row.movement / b).fold(worst_use, f64::max);
                }
                Regime::Unbounded => unbounded += 1,
            }
        }
    }
    let p = 64;
    let samples = clustered_blobs(&mut rng(10), p, 3).unwrap();
    let w = Weights::uniform(3);
    let params = acceptance_params(1e-7);
    let reference = solve_kept(&samples, &w, &params);
    cases.push(grid_case("breakdown reference", &reference.median, &samples, 1.0, [0.0, 0.0]));
    let minority = breakdown_sweep_2d(&samples, &w, &[1], &[0.0, 10.0, 20.0, 40.0], &params).unwrap();
    let majority = breakdown_sweep_2d(&samples, &w, &[0, 2], &[10.0, 40.0], &params).unwrap();
    let max_move = minority.rows.iter().map(|row| row.movement).fold(0.0, f64::max);
    let last = majority.rows.last().unwrap();
    (
        minority.passed && majority.passed,
        format!(
            "1D: {bounded} bounded sweeps to D = 1e6 (movement ≤ {:.0}% of the bound), {unbounded} unbounded sweeps reach D/2; 2D p = 64: movement ≤ {max_move:.2} vs threshold {:.2}, majority moves {:.1} ≥ {:.1}",
            100.0 * worst_use,
            minority.rows[0].threshold.unwrap(),
            last.movement_lower,
            last.actual_displacement / 2.0
        ),
    )
}

fn random_potentials(r: &mut impl Rng, p: usize, n: usize, amplitude: f64) -> PotentialVector {
    let mut u = PotentialVector::zeros(p, n);
    for f in &mut u.u {
        *f = ScalarField::from_fn(p, |_, _| amplitude * r.gen_range(-1.0..1.0));
    }
    u
}

fn p_laplace(cases: &mut Vec<MomentCase>) -> Outcome {
    let p = 32;
    let samples = vec![
        blob(p, [8.0, 8.0], 5.0).unwrap(),
        blob(p, [22.0, 10.0], 6.0).unwrap(),
        blob(p, [14.0, 24.0], 5.0).unwrap(),
    ];
    let w = Weights::uniform(3);
    let dr = solve_kept(&samples, &w, &acceptance_params(1e-8));
    cases.push(grid_case("p-Laplace reference", &dr.median, &samples, 1.0, [0.0, 0.0]));

    // Finite-difference gradient check at random points.
    let mut r = rng(11);
    let mut worst_fd = 0.0f64;
    for (eps, exponent) in [(1e-1, 4.0), (1e-2, 8.0), (1e-3, 16.0)] {
        let params = PLaplaceParams { epsilon: eps, exponent, ..PLaplaceParams::default() };
        for _ in 0..2 {
            let u = random_potentials(&mut r, p, 3, 0.05);
            let d = random_potentials(&mut r, p, 3, 1.0);
            let g = j_eps_gradient(&u, &samples, &w, &params).unwrap();
            let analytic: f64 = g.u.iter().zip(&d.u).map(|(a, b)| a.dot(b)).sum();
            let shifted = |t: f64| {
                let mut v = u.clone();
                for (vf, df) in v.u.iter_mut().zip(&d.u) {
                    vf.axpy(t, df);
                }
                j_eps(&v, &samples, &w, &params).unwrap()
            };
            let t = 1e-5;
            let numeric = (shifted(t) - shifted(-t)) / (2.0 * t);
            worst_fd = worst_fd.max((numeric - analytic).abs() / analytic.abs().max(1e-300));
        }
    }

    let mut start = PotentialVector::zeros(p, 3);
    let mut distances = Vec::new();
    let mut masses = Vec::new();
    let mut monotone = true;
    let mut converged = true;
    for (eps, exponent) in [(1e-1, 4.0), (1e-2, 8.0), (1e-3, 16.0)] {
        let params = PLaplaceParams { epsilon: eps, exponent, tol: 1e-5, max_iter: 3000, ..PLaplaceParams::default() };
        let sol = match minimize_j_eps_from(start.clone(), &samples, &w, &params) {
            Ok(s) => s,
            Err(Error::PLaplaceNoConvergence(s)) => *s,
            Err(e) => panic!("{e}"),
        };
        converged &= sol.report.converged;
        monotone &= sol.report.j_history.windows(2).all(|h| h[1] <= h[0]);
        masses.push(sol.report.mass);
        let nu = GridMeasure::from_density(sol.nu_eps.clone()).unwrap();
        distances.push(grid_w1_bounds(&nu, &dr.median).unwrap().estimate);
        start = sol.potentials;
    }
    let mass_ok = masses.iter().all(|m| (m - 1.0).abs() <= 1e-2);
    let nonincreasing = distances.windows(2).all(|d| d[1] <= d[0]);
    (
        worst_fd <= 1e-5 && converged && monotone && mass_ok && nonincreasing,
        format!(
            "gradient check {worst_fd:.1e}; J decreasing {monotone}; masses {:.4}, {:.4}, {:.4}; W₁ to the DR median {:.3} → {:.3} → {:.3}",
            masses[0], masses[1], masses[2], distances[0], distances[1], distances[2]
        ),
    )
}

fn moment_bounds(cases: &mut Vec<MomentCase>) -> Outcome {
    let mut failures = Vec::new();
    let mut worst_residue = 0.0f64;
    for case in cases.iter() {
        let all: Vec<Point> = case.samples.iter().flat_map(|s| s.points().iter().copied()).collect();
        let hull = convex_hull(&all);
        let residue: f64 = case
            .median
            .iter()
            .filter(|(x, _)| hull_distance(&hull, *x) > case.h)
            .map(|(_, m)| m)
            .sum();
        worst_residue = worst_residue.max(residue);
        if residue > HULL_RESIDUE {
            failures.push(format!("{}: mass {residue:.1e} beyond one cell of the hull", case.name));
        }
        for exponent in [1.0, 2.0] {
            let rep = moment_bound_check(&case.median, &case.samples, exponent, case.h);
            if !rep.moment_ok {
                failures.push(format!(
                    "{} (q = {exponent}): moment {:.4e} exceeds {:.4e} + {:.1e}",
                    case.name, rep.median_moment, rep.sample_moment_sum, rep.slack
                ));
            }
        }
    }
    (
        failures.is_empty() && !cases.is_empty(),
        if failures.is_empty() {
            format!(
                "{} grid medians pass the moment bound for q = 1 and q = 2; at most {worst_residue:.1e} of the mass lies beyond one cell of the hull",
                cases.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

/// Optimality residual computed from scratch: the weighted sum of unit
/// vectors, with the anchor's own weight absorbing the rest when the point
/// sits on a data point.
fn subgradient_residual(points: &[Point], w: &[f64], x: Point) -> f64 {
    let scale = points.iter().map(|q| q[0].abs().max(q[1].abs())).fold(1.0, f64::max);
    let mut g = [0.0, 0.0];
    let mut anchored = 0.0;
    for (q, l) in points.iter().zip(w) {
        let d = (x[0] - q[0]).hypot(x[1] - q[1]);
        if d <= 1e-12 * scale {
            anchored += l;
        } else {
            g[0] += l * (x[0] - q[0]) / d;
            g[1] += l * (x[1] - q[1]) / d;
        }
    }
    (g[0].hypot(g[1]) - anchored).max(0.0)
}

fn geometric_median_certificates(_: &mut Vec<MomentCase>) -> Outcome {
    let mut r = rng(12);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = r.gen_range(1..=12);
        let pts: Vec<Point> = (0..n).map(|_| [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect();
        let w = random_weights(&mut r, n);
        let cert = weiszfeld(&pts, &w, 1e-10, 100_000).unwrap();
        worst = worst.max(cert.residual).max(subgradient_residual(&pts, w.as_slice(), cert.point));
    }
    let mut worst_diag = 0.0f64;
    for _ in 0..100 {
        let radius = r.gen_range(0.5..5.0);
        let mut angles: Vec<f64> = (0..4).map(|_| r.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let q: Vec<Point> = angles.iter().map(|a| [radius * a.cos(), radius * a.sin()]).collect();
        // Intersection of the diagonals q0q2 and q1q3.
        let (d1, d2) = ([q[2][0] - q[0][0], q[2][1] - q[0][1]], [q[3][0] - q[1][0], q[3][1] - q[1][1]]);
        let det = d1[0] * d2[1] - d1[1] * d2[0];
        if det.abs() < 1e-6 {
            continue;
        }
        let s = ((q[1][0] - q[0][0]) * d2[1] - (q[1][1] - q[0][1]) * d2[0]) / det;
        let x = [q[0][0] + s * d1[0], q[0][1] + s * d1[1]];
        let cert = weiszfeld(&q, &Weights::uniform(4), 1e-12, 100_000).unwrap();
        worst_diag = worst_diag.max((cert.point[0] - x[0]).hypot(cert.point[1] - x[1]));
    }
    (
        worst <= 1e-8 && worst_diag <= 1e-6,
        format!("500 instances, worst residual {worst:.1e}; quadrilateral diagonals matched to {worst_diag:.1e}"),
    )
}
