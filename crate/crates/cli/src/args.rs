//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wmedian", version, about = "Wasserstein medians of probability measures")]
pub struct Cli {
    /// Suppress progress lines on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact median of 1D measures given as CSV files.
    Median1d(Median1dArgs),
    /// Median of grid measures by Douglas-Rachford splitting.
    Median2d(Median2dArgs),
    /// Smoothed p-Laplace approximation of the median.
    Plaplace(PlaplaceArgs),
    /// Experiment harnesses.
    Experiment {
        #[command(subcommand)]
        kind: ExperimentCommand,
    },
    /// Check a computed median against its optimality conditions.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Comma-separated weights, one per input. Defaults to uniform.
    #[arg(long, value_delimiter = ',', conflicts_with = "weights_file")]
    pub weights: Option<Vec<f64>>,

    /// File with the weights, separated by commas or whitespace.
    #[arg(long)]
    pub weights_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Selection {
    Vertical,
    Horizontal,
}

#[derive(Debug, Args)]
pub struct Median1dArgs {
    /// Sample measures as CSV (`x,mass` or `edge_left,edge_right,mass`).
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,

    #[command(flatten)]
    pub weights: WeightArgs,

    /// Interpolation between the lower (0) and upper (1) median.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,

    #[arg(long, value_enum, default_value_t = Selection::Vertical)]
    pub selection: Selection,

    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Direct,
    Cg,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Douglas-Rachford step size.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,

    /// Constant relaxation parameter in [0, 2).
    #[arg(long, default_value_t = 1.0)]
    pub theta_relax: f64,

    /// Stop when the squared step residual falls below this.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,

    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,

    /// Relative tolerance of the conjugate gradient backend.
    #[arg(long, default_value_t = 1e-10)]
    pub cg_tol: f64,

    #[arg(long, value_enum, default_value_t = Backend::Direct)]
    pub backend: Backend,

    /// Seed for a randomized initial state.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct Median2dArgs {
    /// Sample measures as PGM images or CSV matrices.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,

    #[command(flatten)]
    pub weights: WeightArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlaplaceArgs {
    /// Sample measures as PGM images or CSV matrices.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,

    #[command(flatten)]
    pub weights: WeightArgs,

    /// Penalty parameter.
    #[arg(long, default_value_t = 1e-2)]
    pub epsilon: f64,

    /// Exponent of the p-Laplacian.
    #[arg(long, default_value_t = 4.0)]
    pub exponent: f64,

    /// Stop when the projected gradient norm falls below this.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,

    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Corrupt some samples by a far Dirac mass and track the median.
    Breakdown(BreakdownArgs),
    /// Perturb the samples and compare the medians.
    Stability(StabilityArgs),
    /// Four thin rectangles whose median concentrates in the centre.
    Quadrilateral(QuadrilateralArgs),
}

#[derive(Debug, Args)]
pub struct BreakdownArgs {
    /// Dimension of the instance, 1 (exact) or 2 (grid solver).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dim: u8,

    /// Number of samples, uniformly weighted.
    #[arg(long, default_value_t = 3)]
    pub n: usize,

    /// Number of corrupted samples.
    #[arg(long, default_value_t = 1)]
    pub corrupt: usize,

    /// Largest displacement (cells in 2D).
    #[arg(long, default_value_t = 1000.0)]
    pub dmax: f64,

    /// Number of nonzero displacements, spaced geometrically up to `dmax`.
    #[arg(long, default_value_t = 4)]
    pub steps: usize,

    /// Grid side in 2D.
    #[arg(long, default_value_t = 64)]
    pub p: usize,

    #[arg(long, default_value_t = 0)]
    pub instance_seed: u64,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Write the full report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dim: u8,

    #[arg(long, default_value_t = 3)]
    pub n: usize,

    /// Perturbation sizes; 1D uses the first one.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub scale: Vec<f64>,

    /// Selection parameter for the 1D probe.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,

    #[arg(long, default_value_t = 100)]
    pub trials: usize,

    #[arg(long, default_value_t = 32)]
    pub p: usize,

    #[arg(long, default_value_t = 0)]
    pub instance_seed: u64,

    #[command(flatten)]
    pub solver: SolverArgs,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuadrilateralArgs {
    /// Rectangle width; several values run the density-ratio trend.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub epsilon: Vec<f64>,

    /// Rectangle length.
    #[arg(long, default_value_t = 0.6)]
    pub ell: f64,

    #[arg(long, default_value_t = 128)]
    pub p: usize,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Output directory for the report and median images.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Sample measures: CSV for 1D, PGM or CSV matrices for grids.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,

    #[command(flatten)]
    pub weights: WeightArgs,

    /// Candidate 1D median as CSV.
    #[arg(long, conflicts_with = "run_dir", required_unless_present = "run_dir")]
    pub candidate: Option<PathBuf>,

    /// Output directory of a `median2d` run.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,

    /// Tolerance of the 1D check.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}
