//! Subcommand implementations. Each returns a one-line JSON summary and
//! whether the underlying solver converged.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use wmedian::dr::{mk_residuals, solve_median_with, DrParams, MedianSolution, Relaxation};
use wmedian::experiments::{
    breakdown_sweep_1d, breakdown_sweep_2d, clustered_blobs, quadrilateral_counterexample,
    quadrilateral_trend, random_atomic, random_histogram, stability_probe_1d, stability_trend_2d,
    uniform_edges, ExperimentSpec,
};
use wmedian::grid2d::{FlowField, GridMeasure, PoissonBackend, ScalarField};
use wmedian::io;
use wmedian::median1d::{dispersion, horizontal_selection, verify_median_1d, vertical_selection, Measure1D};
use wmedian::plaplace::{minimize_j_eps, PLaplaceParams, PLaplaceSolution};
use wmedian::{Error, Weights};

use crate::args::{
    Backend, BreakdownArgs, ExperimentCommand, Median1dArgs, Median2dArgs, PlaplaceArgs,
    QuadrilateralArgs, Selection, SolverArgs, StabilityArgs, VerifyArgs, WeightArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable inputs.
    Usage(String),
    /// Anything that went wrong while running.
    Failure(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidWeights(_) | Error::InvalidArgument(_) | Error::Parse(_) => Self::Usage(e.to_string()),
            _ => Self::Failure(e.to_string()),
        }
    }
}

pub type CmdResult = Result<Outcome, CliError>;

pub struct Outcome {
    pub summary: Value,
    pub converged: bool,
    /// Verification commands report a failed check through this flag.
    pub valid: bool,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, converged: true, valid: true }
    }
}

/// Progress reporting on standard error.
#[derive(Clone, Copy)]
pub struct Progress {
    pub quiet: bool,
}

impl Progress {
    fn line(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn check_inputs(paths: &[PathBuf]) -> Result<(), CliError> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Usage(format!("input {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn weights(args: &WeightArgs, n: usize) -> Result<Weights, CliError> {
    let values = match (&args.weights, &args.weights_file) {
        (Some(w), _) => w.clone(),
        (None, Some(path)) => fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("bad weight `{t}`"))))
            .collect::<Result<Vec<_>, _>>()?,
        (None, None) => return Ok(Weights::uniform(n)),
    };
    let w = Weights::new(values).map_err(CliError::usage)?;
    w.require_len(n).map_err(CliError::usage)?;
    Ok(w)
}

fn dr_params(args: &SolverArgs) -> Result<DrParams, CliError> {
    let params = DrParams {
        tau: args.tau,
        relaxation: Relaxation::Constant(args.theta_relax),
        tol: args.tol,
        max_iter: args.max_iter,
        cg_tol: args.cg_tol,
        seed: args.seed,
        backend: match args.backend {
            Backend::Direct => PoissonBackend::Direct,
            Backend::Cg => PoissonBackend::ConjugateGradient { max_iter: 1000 },
        },
    };
    params.validate().map_err(CliError::usage)?;
    Ok(params)
}

fn read_1d(paths: &[PathBuf]) -> Result<Vec<Measure1D>, CliError> {
    check_inputs(paths)?;
    paths
        .iter()
        .map(|p| io::read_measure_1d(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))))
        .collect()
}

fn read_grids(paths: &[PathBuf]) -> Result<Vec<GridMeasure>, CliError> {
    check_inputs(paths)?;
    let grids = paths
        .iter()
        .map(|p| io::read_grid_measure(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(g) = grids.iter().find(|g| g.side() != grids[0].side()) {
        return Err(CliError::Usage(format!(
            "inputs have different grid sides {} and {}",
            grids[0].side(),
            g.side()
        )));
    }
    Ok(grids)
}

fn paths_json(paths: &[PathBuf]) -> Value {
    json!(paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("{}: {e}", dir.display())))
}

pub fn median1d(args: &Median1dArgs, _progress: Progress) -> CmdResult {
    let samples = read_1d(&args.inputs)?;
    let w = weights(&args.weights, samples.len())?;
    let median = match args.selection {
        Selection::Vertical => vertical_selection(&w, &samples, args.theta),
        Selection::Horizontal => horizontal_selection(&w, &samples, args.theta),
    }
    .map_err(CliError::usage)?;
    io::write_measure_1d(&args.out, &median)?;
    Ok(Outcome::ok(json!({
        "command": "median1d",
        "selection": format!("{:?}", args.selection).to_lowercase(),
        "theta": args.theta,
        "dispersion": dispersion(&w, &samples, &median)?,
        "atomic": median.is_atomic(),
        "out": args.out.display().to_string(),
    })))
}

fn write_grid(dir: &Path, name: &str, f: &ScalarField) -> Result<(), CliError> {
    io::write_matrix_csv(&dir.join(format!("{name}.csv")), f)?;
    Ok(())
}

fn write_flows(dir: &Path, flows: &[FlowField]) -> Result<(), CliError> {
    for (q, f) in flows.iter().enumerate() {
        io::write_flow(&dir.join(format!("flow_{q}")), f)?;
    }
    Ok(())
}

fn write_median_outputs(dir: &Path, sol: &MedianSolution) -> Result<(), CliError> {
    io::write_pgm(&dir.join("median.pgm"), sol.median.field())?;
    write_grid(dir, "median", sol.median.field())?;
    for (q, d) in sol.densities.iter().enumerate() {
        write_grid(dir, &format!("density_{q}"), d)?;
    }
    for (q, u) in sol.potentials.iter().enumerate() {
        write_grid(dir, &format!("potential_{q}"), u)?;
    }
    write_flows(dir, &sol.flows)?;
    io::write_atomic(&dir.join("history.csv"), io::format_history(&sol.history).as_bytes())?;
    Ok(())
}

fn solve_2d(
    samples: &[GridMeasure],
    w: &Weights,
    params: &DrParams,
    progress: Progress,
) -> Result<MedianSolution, CliError> {
    let every = (params.max_iter / 20).max(1);
    let observe = |h: &wmedian::dr::HistoryEntry| {
        if h.iter % every == 0 {
            progress.line(format!("iter {} residual {:e} primal {}", h.iter, h.residual, h.primal_value));
        }
    };
    match solve_median_with(samples, w, params, observe) {
        Ok(s) => Ok(s),
        Err(Error::MedianNoConvergence(s)) => {
            progress.line(format!("not converged after {} iterations", s.iterations));
            Ok(*s)
        }
        Err(e) => Err(e.into()),
    }
}

fn solution_json(sol: &MedianSolution) -> Value {
    json!({
        "iterations": sol.iterations,
        "final_residual": sol.final_residual,
        "converged": sol.converged,
        "primal_value": sol.primal_value,
        "dual_value": sol.dual_value,
        "certified_gap": sol.certified_gap(),
    })
}

pub fn median2d(args: &Median2dArgs, progress: Progress) -> CmdResult {
    let samples = read_grids(&args.inputs)?;
    let w = weights(&args.weights, samples.len())?;
    let params = dr_params(&args.solver)?;
    create_dir(&args.out)?;
    let sol = solve_2d(&samples, &w, &params, progress)?;
    write_median_outputs(&args.out, &sol)?;
    let run = json!({
        "command": "median2d",
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": paths_json(&args.inputs),
        "weights": w.as_slice(),
        "grid_side": samples[0].side(),
        "params": params,
        "result": solution_json(&sol),
    });
    io::write_json(&args.out.join("run.json"), &run)?;
    let mut summary = solution_json(&sol);
    summary["command"] = json!("median2d");
    summary["out"] = json!(args.out.display().to_string());
    Ok(Outcome {
        summary,
        converged: sol.converged,
        valid: true,
    })
}

pub fn plaplace(args: &PlaplaceArgs, progress: Progress) -> CmdResult {
    let samples = read_grids(&args.inputs)?;
    let w = weights(&args.weights, samples.len())?;
    let params = PLaplaceParams {
        epsilon: args.epsilon,
        exponent: args.exponent,
        tol: args.tol,
        max_iter: args.max_iter,
        ..PLaplaceParams::default()
    };
    params.validate().map_err(CliError::usage)?;
    create_dir(&args.out)?;
    let sol: PLaplaceSolution = match minimize_j_eps(&samples, &w, &params) {
        Ok(s) => s,
        Err(Error::PLaplaceNoConvergence(s)) => {
            progress.line(format!("not converged after {} iterations", s.report.iterations));
            *s
        }
        Err(e) => return Err(e.into()),
    };
    io::write_pgm(&args.out.join("nu_eps.pgm"), &sol.nu_eps)?;
    write_grid(&args.out, "nu_eps", &sol.nu_eps)?;
    for (q, u) in sol.potentials.u.iter().enumerate() {
        write_grid(&args.out, &format!("potential_{q}"), u)?;
    }
    write_flows(&args.out, &sol.flows)?;
    let r = &sol.report;
    io::write_json(
        &args.out.join("report.json"),
        &json!({
            "command": "plaplace",
            "version": env!("CARGO_PKG_VERSION"),
            "inputs": paths_json(&args.inputs),
            "weights": w.as_slice(),
            "params": params,
            "report": r,
        }),
    )?;
    Ok(Outcome {
        summary: json!({
            "command": "plaplace",
            "epsilon": r.epsilon,
            "exponent": r.exponent,
            "iterations": r.iterations,
            "converged": r.converged,
            "j_value": r.j_value,
            "projected_gradient_norm": r.projected_gradient_norm,
            "mass": r.mass,
            "out": args.out.display().to_string(),
        }),
        converged: r.converged,
        valid: true,
    })
}

fn write_report(out: &Option<PathBuf>, value: &Value) -> Result<(), CliError> {
    if let Some(path) = out {
        io::write_json(path, value)?;
    }
    Ok(())
}

fn displacements(dmax: f64, steps: usize) -> Vec<f64> {
    let mut d = vec![0.0];
    d.extend((0..steps).map(|k| dmax / 10f64.powi((steps - 1 - k) as i32)));
    d
}

fn breakdown(args: &BreakdownArgs, progress: Progress) -> CmdResult {
    if args.n == 0 || args.corrupt == 0 || args.corrupt > args.n {
        return Err(CliError::Usage(format!("need 1 ≤ corrupt ≤ n, got corrupt {} and n {}", args.corrupt, args.n)));
    }
    if !(args.dmax > 0.0) || args.steps == 0 {
        return Err(CliError::Usage("need a positive --dmax and --steps".into()));
    }
    let params = dr_params(&args.solver)?;
    let spec = ExperimentSpec {
        name: "breakdown".into(),
        parameters: json!({"dim": args.dim, "n": args.n, "corrupt": args.corrupt, "dmax": args.dmax, "steps": args.steps, "p": args.p}),
        solver: (args.dim == 2).then(|| params.clone()),
        seed: args.instance_seed,
    };
    let mut rng = spec.rng();
    let w = Weights::uniform(args.n);
    let corrupt: Vec<usize> = (0..args.corrupt).collect();
    let d = displacements(args.dmax, args.steps);
    let report = if args.dim == 1 {
        let samples = (0..args.n)
            .map(|_| random_atomic(&mut rng, 8, 1.0))
            .collect::<Result<Vec<_>, _>>()?;
        breakdown_sweep_1d(&samples, &w, &corrupt, &d)?
    } else {
        let samples = clustered_blobs(&mut rng, args.p, args.n)?;
        progress.line(format!("solving {} grid instances", d.len() + 1));
        breakdown_sweep_2d(&samples, &w, &corrupt, &d, &params)?
    };
    write_report(&args.out, &json!({"spec": spec, "report": report}))?;
    let max_movement = report.rows.iter().map(|r| r.movement).fold(0.0, f64::max);
    Ok(Outcome::ok(json!({
        "command": "experiment breakdown",
        "dim": args.dim,
        "corrupt_weight": report.corrupt_weight,
        "regime": report.regime,
        "c_bound": report.c_bound,
        "bound": report.bound,
        "max_movement": max_movement,
        "checks": report.rows.iter().map(|r| json!({"displacement": r.displacement, "movement": r.movement, "threshold": r.threshold, "passed": r.passed})).collect::<Vec<_>>(),
        "passed": report.passed,
    })))
}

fn stability(args: &StabilityArgs, _progress: Progress) -> CmdResult {
    if args.n == 0 || args.scale.is_empty() {
        return Err(CliError::Usage("need --n ≥ 1 and at least one --scale".into()));
    }
    let params = dr_params(&args.solver)?;
    let spec = ExperimentSpec {
        name: "stability".into(),
        parameters: json!({"dim": args.dim, "n": args.n, "scale": args.scale, "theta": args.theta, "trials": args.trials, "p": args.p}),
        solver: (args.dim == 2).then(|| params.clone()),
        seed: args.instance_seed,
    };
    let mut rng = spec.rng();
    let w = Weights::uniform(args.n);
    let summary = if args.dim == 1 {
        let edges = uniform_edges(-1.0, 1.0, 32);
        let samples = (0..args.n)
            .map(|_| random_histogram(&mut rng, &edges))
            .collect::<Result<Vec<_>, _>>()?;
        let report = stability_probe_1d(&samples, &w, args.scale[0], args.theta, args.trials, args.instance_seed)?;
        write_report(&args.out, &json!({"spec": spec, "report": report}))?;
        json!({
            "command": "experiment stability",
            "dim": 1,
            "trials": report.trials.len(),
            "all_hold": report.all_hold,
            "passed": report.all_hold,
        })
    } else {
        let samples = clustered_blobs(&mut rng, args.p, args.n)?;
        let report = stability_trend_2d(&samples, &w, &args.scale, args.trials, args.instance_seed, &params)?;
        write_report(&args.out, &json!({"spec": spec, "report": report}))?;
        json!({
            "command": "experiment stability",
            "dim": 2,
            "mean_movement": report.rows.iter().map(|r| json!({"scale": r.scale, "mean": r.mean_movement})).collect::<Vec<_>>(),
            "nondecreasing": report.nondecreasing,
            "passed": report.nondecreasing,
        })
    };
    Ok(Outcome::ok(summary))
}

fn quadrilateral(args: &QuadrilateralArgs, progress: Progress) -> CmdResult {
    let params = dr_params(&args.solver)?;
    if let Some(dir) = &args.out {
        create_dir(dir)?;
    }
    if args.epsilon.len() > 1 {
        progress.line(format!("running {} instances", args.epsilon.len()));
        let trend = quadrilateral_trend(&args.epsilon, args.ell, args.p, &params)?;
        if let Some(dir) = &args.out {
            io::write_json(&dir.join("report.json"), &json!({"params": params, "trend": trend}))?;
        }
        let converged = trend.reports.iter().all(|r| r.solver.converged);
        return Ok(Outcome {
            summary: json!({
                "command": "experiment quadrilateral",
                "epsilon": args.epsilon,
                "linf_ratio": trend.reports.iter().map(|r| r.linf_ratio).collect::<Vec<_>>(),
                "central_mass_fraction": trend.reports.iter().map(|r| r.central_mass_fraction).collect::<Vec<_>>(),
                "ratio_increasing": trend.ratio_increasing,
            }),
            converged,
            valid: true,
        });
    }
    let eps = args.epsilon[0];
    let (report, sol) = quadrilateral_counterexample(eps, args.ell, args.p, &params)?;
    if let Some(dir) = &args.out {
        io::write_pgm(&dir.join("median.pgm"), sol.median.field())?;
        write_grid(dir, "median", sol.median.field())?;
        io::write_atomic(&dir.join("history.csv"), io::format_history(&sol.history).as_bytes())?;
        io::write_json(&dir.join("report.json"), &json!({"params": params, "report": report}))?;
    }
    Ok(Outcome {
        summary: json!({
            "command": "experiment quadrilateral",
            "epsilon": eps,
            "ell": args.ell,
            "p": args.p,
            "central_mass_fraction": report.central_mass_fraction,
            "linf_ratio": report.linf_ratio,
            "converged": report.solver.converged,
            "iterations": report.solver.iterations,
        }),
        converged: report.solver.converged,
        valid: true,
    })
}

pub fn experiment(kind: &ExperimentCommand, progress: Progress) -> CmdResult {
    match kind {
        ExperimentCommand::Breakdown(a) => breakdown(a, progress),
        ExperimentCommand::Stability(a) => stability(a, progress),
        ExperimentCommand::Quadrilateral(a) => quadrilateral(a, progress),
    }
}

fn load_run(dir: &Path, n: usize) -> Result<MedianSolution, CliError> {
    let read = |name: String| {
        io::read_matrix_csv(&dir.join(&name)).map_err(|e| CliError::Usage(format!("{name}: {e}")))
    };
    let median = GridMeasure::new(read("median.csv".into())?).map_err(CliError::usage)?;
    let mut flows = Vec::with_capacity(n);
    let mut potentials = Vec::with_capacity(n);
    for q in 0..n {
        flows.push(
            io::read_flow(&dir.join(format!("flow_{q}")))
                .map_err(|e| CliError::Usage(format!("flow_{q}: {e}")))?,
        );
        potentials.push(read(format!("potential_{q}.csv"))?);
    }
    Ok(MedianSolution {
        densities: flows.iter().map(FlowField::magnitudes).collect(),
        median,
        flows,
        primal_value: 0.0,
        potentials,
        dual_value: 0.0,
        iterations: 0,
        final_residual: 0.0,
        converged: true,
        history: Vec::new(),
    })
}

/// Largest constraint residual and relative gap accepted by `verify`.
const VERIFY_CONSTRAINT_TOL: f64 = 1e-6;
const VERIFY_GAP_TOL: f64 = 1e-2;

pub fn verify(args: &VerifyArgs, _progress: Progress) -> CmdResult {
    if let Some(candidate) = &args.candidate {
        let samples = read_1d(&args.inputs)?;
        let w = weights(&args.weights, samples.len())?;
        let cand = read_1d(std::slice::from_ref(candidate))?.remove(0);
        let valid = verify_median_1d(&w, &samples, &cand, args.tol)?;
        return Ok(Outcome {
            summary: json!({
                "command": "verify",
                "kind": "1d",
                "tol": args.tol,
                "dispersion": dispersion(&w, &samples, &cand)?,
                "valid": valid,
            }),
            converged: true,
            valid,
        });
    }
    let dir = args.run_dir.as_ref().expect("clap requires --candidate or --run-dir");
    let samples = read_grids(&args.inputs)?;
    let w = weights(&args.weights, samples.len())?;
    let sol = load_run(dir, samples.len())?;
    let report = mk_residuals(&sol, &samples, &w)?;
    let worst = report.constraint_residuals.iter().copied().fold(0.0, f64::max);
    let valid = worst <= VERIFY_CONSTRAINT_TOL && report.gap <= VERIFY_GAP_TOL * report.primal_value.max(1.0);
    Ok(Outcome {
        summary: json!({
            "command": "verify",
            "kind": "2d",
            "report": report,
            "valid": valid,
        }),
        converged: true,
        valid,
    })
}
