//! Flag grammar and dispatch.

use crate::commands;
use crate::error::{CliError, CliResult};
use crate::parallel::with_threads;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "hklab", version, about = "Heat kernels, spectra and Brownian motion on metric graphs")]
pub struct Cli {
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Directory for result files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Graph documents.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Evaluate p_t(x, y).
    Kernel(KernelArgs),
    /// Single-graph heat trace from eigenvalues.
    Trace(TraceArgs),
    /// Eigenvalues with residual report.
    Eigen(EigenArgs),
    /// Locality certificate for two kernels agreeing on U.
    Locality(LocalityArgs),
    /// First-exit decomposition residual of the kernel.
    Decompose(DecomposeArgs),
    /// Monte Carlo diffusion.
    #[command(subcommand)]
    Mc(McCmd),
    /// Two indistinguishable particles.
    #[command(subcommand)]
    Twoparticle(TwoParticleCmd),
    /// Difference-quotient energies.
    #[command(subcommand)]
    Energy(EnergyCmd),
    /// Run the acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Subcommand)]
pub enum GraphCmd {
    Validate { path: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum McCmd {
    /// Endpoint (and exit-time) histograms of a direct ensemble.
    Simulate(SimulateArgs),
    /// Ensemble that follows graph A inside U and graph B after the exit.
    Splice(SpliceArgs),
}

#[derive(Debug, Subcommand)]
pub enum TwoParticleCmd {
    /// Heat trace of the symmetric product with an asymptotic fit.
    Trace(TpTraceArgs),
    /// Predicted small-time coefficients, with the region breakdown.
    Predict(PredictArgs),
}

#[derive(Debug, Subcommand)]
pub enum EnergyCmd {
    /// E_r over dyadic radii against the classical energy.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    Pathsum,
    Spectral,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMethod {
    Eigen,
    Quadrature,
}

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long)]
    #[serde(skip)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "pathsum")]
    pub method: KernelMethod,
    /// Time, or LO:HI:N log-spaced.
    #[arg(long)]
    pub t: String,
    /// EDGE:S
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TraceArgs {
    #[arg(long)]
    #[serde(skip)]
    pub graph: PathBuf,
    #[arg(long)]
    pub tgrid: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EigenArgs {
    #[arg(long)]
    #[serde(skip)]
    pub graph: PathBuf,
    #[arg(long = "kmax")]
    pub k_max: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct LocalityArgs {
    #[arg(long = "graph-a")]
    #[serde(skip)]
    pub graph_a: PathBuf,
    #[arg(long = "graph-b")]
    #[serde(skip)]
    pub graph_b: PathBuf,
    /// Map document from U in A onto its image in B.
    #[arg(long)]
    #[serde(skip)]
    pub map: PathBuf,
    /// Pieces EDGE:LO:HI of V in A, comma separated.
    #[arg(long = "V")]
    pub v: String,
    #[arg(long)]
    pub tgrid: String,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    #[arg(long)]
    #[serde(skip)]
    pub graph: PathBuf,
    /// Pieces EDGE:LO:HI of U, comma separated.
    #[arg(long = "U")]
    pub u: String,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long = "time-step", default_value_t = 1e-4)]
    pub time_step: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub graph: PathBuf,
    #[arg(long)]
    pub x0: String,
    /// Horizon.
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    /// Base seed; HKLAB_SEED overrides it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Bins per edge.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Watched set for exit times, pieces EDGE:LO:HI.
    #[arg(long = "U")]
    pub u: Option<String>,
    /// Also store this many step-by-step sample paths (seeds seed,
    /// seed+1, ...) to paths.csv.
    #[arg(long, default_value_t = 0)]
    pub store: u64,
    #[arg(long, default_value_t = hklab_core::mc::DEFAULT_DECIMATION)]
    pub decimation: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SpliceArgs {
    #[arg(long = "graph-a")]
    #[serde(skip)]
    pub graph_a: PathBuf,
    #[arg(long = "graph-b")]
    #[serde(skip)]
    pub graph_b: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub map: PathBuf,
    /// Start point in A, inside U.
    #[arg(long)]
    pub x0: String,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Also run a direct ensemble on B and compare endpoint laws.
    #[arg(long)]
    pub compare: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TpTraceArgs {
    #[arg(long)]
    #[serde(skip)]
    pub graph: PathBuf,
    #[arg(long, default_value = "0.002:0.02:8")]
    pub tgrid: String,
    #[arg(long, value_enum, default_value = "eigen")]
    pub method: TraceMethod,
    /// Quadrature panel width.
    #[arg(long, default_value_t = 2e-3)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    #[serde(skip)]
    pub graph: PathBuf,
    /// Vertex neighbourhood size for the region breakdown; min length / 8
    /// by default.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct StudyArgs {
    #[arg(long)]
    #[serde(skip)]
    pub graph: PathBuf,
    /// sin:K, dist:EDGE:S or bump:EDGE:S:W.
    #[arg(long)]
    pub function: String,
    /// R0:N, radii R0, R0/2, ... (N of them).
    #[arg(long, default_value = "0.01:4")]
    pub radii: String,
    /// Sampling step; smallest radius / 20 by default.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelftestArgs {
    /// Only these criteria, comma separated.
    #[arg(long)]
    pub only: Option<String>,
    #[arg(long, default_value_t = crate::acceptance::DEFAULT_SEED)]
    pub seed: u64,
}

/// Base seed, replaced by `HKLAB_SEED` when set.
pub fn effective_seed(flag: u64) -> CliResult<u64> {
    match std::env::var("HKLAB_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| CliError::usage(format!("HKLAB_SEED: not an unsigned integer: '{s}'"))),
        Err(_) => Ok(flag),
    }
}

/// Outcome of a command: a summary line and whether it succeeded.
pub struct Outcome {
    pub summary: String,
    pub ok: bool,
}

impl Outcome {
    pub fn ok(summary: impl Into<String>) -> Self {
        Self { summary: summary.into(), ok: true }
    }
}

pub fn dispatch(cli: &Cli) -> CliResult<Outcome> {
    if std::env::var_os("HKLAB_BREAK_SIGMA").is_some_and(|v| !v.is_empty() && v != "0") {
        hklab_core::graph::fault::set_sigma_broken(true);
    }
    let out = &cli.out;
    match &cli.command {
        Command::Graph(GraphCmd::Validate { path }) => commands::validate(path),
        Command::Kernel(a) => commands::kernel(a, out),
        Command::Trace(a) => commands::trace(a, out),
        Command::Eigen(a) => commands::eigen(a, out),
        Command::Locality(a) => commands::locality(a, out),
        Command::Decompose(a) => commands::decompose(a, out),
        Command::Mc(McCmd::Simulate(a)) => commands::simulate(a, out),
        Command::Mc(McCmd::Splice(a)) => commands::splice(a, out),
        Command::Twoparticle(TwoParticleCmd::Trace(a)) => commands::tp_trace(a, out),
        Command::Twoparticle(TwoParticleCmd::Predict(a)) => commands::tp_predict(a, out),
        Command::Energy(EnergyCmd::Study(a)) => commands::energy_study(a, out),
        Command::Selftest(a) => commands::selftest(a, out),
    }
}

/// Parses `argv`, runs the command and returns the exit code: 0 on
/// success, 1 when the self-test has failing criteria, 2 on errors (with a
/// JSON object on stderr).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().to_string());
            let _ = writeln!(std::io::stderr(), "{}", err.to_json());
            return 2;
        }
    };
    match with_threads(cli.threads, || dispatch(&cli)) {
        Ok(o) => {
            println!("{}", o.summary);
            if o.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}", e.to_json());
            2
        }
    }
}
