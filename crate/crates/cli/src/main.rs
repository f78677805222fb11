//! Command-line front end. Exit status is 0 when the result verifies, 2 when
//! it does not, and 1 on any error.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use varlin::estimator::EstimatorConfig;
use varlin::optimize::Method;

/// Worker threads for the rayon pool; unset means one per core.
const THREADS_ENV: &str = "VARLIN_THREADS";

#[derive(Parser, Debug)]
#[command(name = "varlin", version)]
#[command(about = "Matrix-vector products and linear solves as variational ground states")]
#[command(after_help = "Any subcommand accepts --config FILE with `key = value` lines; explicit flags win.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prepare M|v0> / ||M|v0>||
    #[command(args_override_self = true)]
    Multiply(SolveArgs),
    /// Prepare M^-1|v0> / ||M^-1|v0>||
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Real- or imaginary-time evolution of an ansatz state
    #[command(args_override_self = true)]
    Evolve(EvolveArgs),
    /// Quantum-jump trajectories under jump operators
    #[command(args_override_self = true)]
    Trajectory(TrajectoryArgs),
    /// Success-probability and timing sweeps over random instances
    #[command(args_override_self = true)]
    Bench(BenchArgs),
    /// Check a parameter vector against a problem
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Depth {
    Auto,
    Fixed(usize),
}

impl FromStr for Depth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Depth::Auto);
        }
        s.parse().map(Depth::Fixed).map_err(|_| format!("expected an integer or `auto`, got {s:?}"))
    }
}

impl Serialize for Depth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Depth::Auto => s.serialize_str("auto"),
            Depth::Fixed(d) => s.serialize_u64(*d as u64),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Vqe,
    Ite,
    Morph,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Gd,
    Lbfgs,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Gd => Method::GradientDescent,
            MethodArg::Lbfgs => Method::Lbfgs,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Hadamard,
    Shots,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Multiply,
    Solve,
}

/// A condition number, or `<k>n` for `k` times the qubit count.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum KappaSpec {
    Value(f64),
    PerQubit(f64),
}

impl KappaSpec {
    pub fn at(self, n: usize) -> f64 {
        match self {
            KappaSpec::Value(k) => k,
            KappaSpec::PerQubit(k) => k * n as f64,
        }
    }
}

impl FromStr for KappaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |_| format!("expected a number or `<k>n`, got {s:?}");
        match s.strip_suffix('n') {
            Some(k) => k.parse().map(KappaSpec::PerQubit).map_err(bad),
            None => s.parse().map(KappaSpec::Value).map_err(bad),
        }
    }
}

impl Serialize for KappaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            KappaSpec::Value(k) => s.serialize_f64(*k),
            KappaSpec::PerQubit(k) => s.serialize_str(&format!("{k}n")),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    /// Shots per amplitude estimate in shots mode
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl EstimatorArgs {
    pub fn config(&self) -> EstimatorConfig {
        match self.mode {
            ModeArg::Exact => EstimatorConfig::exact(),
            ModeArg::Hadamard => EstimatorConfig::hadamard_exact(),
            ModeArg::Shots => EstimatorConfig::shots(self.shots, self.seed),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    /// Matrix Market, JSON entry list or Pauli text
    #[arg(long)]
    pub matrix: PathBuf,
    /// Circuit JSON preparing |v0>, or `zero`
    #[arg(long, default_value = "zero")]
    pub v0: String,
    /// Ansatz depth, or `auto` to escalate until verification passes
    #[arg(long, default_value = "auto")]
    pub depth: Depth,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    #[arg(long, value_enum, default_value = "morph")]
    pub optimizer: OptimizerKind,
    /// Inner descent method; L-BFGS for morph, gradient descent otherwise
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_steps: usize,
    /// Energy target relative to the problem's energy scale
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Imaginary-time step
    #[arg(long, default_value_t = 0.1)]
    pub dtau: f64,
    /// Comma-separated initial angles
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, num_args = 1, allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, default_value_t = 0.99)]
    pub fidelity_min: f64,
    /// Report JSON; printed to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-step CSV
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EvolveArgs {
    /// Hamiltonian in any matrix format
    #[arg(long)]
    pub hamiltonian: PathBuf,
    #[arg(long)]
    pub time: f64,
    #[arg(long)]
    pub dt: f64,
    /// Evolve in imaginary time
    #[arg(long)]
    pub imaginary: bool,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Initial angles; all zero (the state |0...0>) by default
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, num_args = 1, allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
    /// Per-step energy above which a step counts as failed
    #[arg(long, default_value_t = 1e-6)]
    pub step_tolerance: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    /// Threshold on the final fidelity against dense propagation
    #[arg(long, default_value_t = 0.99)]
    pub fidelity_min: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub hamiltonian: PathBuf,
    /// Jump operator file; repeat for several channels
    #[arg(long = "jump")]
    pub jumps: Vec<PathBuf>,
    #[arg(long)]
    pub time: f64,
    #[arg(long)]
    pub dt: f64,
    #[arg(long, default_value_t = 100)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, num_args = 1, allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-6)]
    pub step_tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of every trajectory's steps
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    /// Qubit counts
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, num_args = 1, required = true)]
    pub n: Vec<usize>,
    /// Condition numbers; `10n` means ten times the qubit count
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, num_args = 1, required = true)]
    pub kappa: Vec<KappaSpec>,
    /// Depths to try in order; 0 through 6 by default
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, num_args = 1)]
    pub depth: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Master seed; generated and printed when absent
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.99)]
    pub fidelity_min: f64,
    #[arg(long, value_enum, default_value = "lbfgs")]
    pub method: MethodArg,
    /// Keep trying deeper circuits after a cell reaches all-success
    #[arg(long)]
    pub all_depths: bool,
    /// Also fit solve time against matrix dimension
    #[arg(long)]
    pub timing: bool,
    /// Result JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cell CSV; printed to stdout when absent
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value = "zero")]
    pub v0: String,
    /// Take task, depth and angles from a solve report
    #[arg(long, conflicts_with_all = ["task", "depth", "theta"])]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "report")]
    pub task: Option<TaskArg>,
    #[arg(long, required_unless_present = "report")]
    pub depth: Option<usize>,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, num_args = 1, allow_hyphen_values = true, required_unless_present = "report")]
    pub theta: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, default_value_t = 0.99)]
    pub fidelity_min: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n = v
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let argv = match input::expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Multiply(a) => commands::solve(varlin::problem::Task::Multiply, a),
        Command::Solve(a) => commands::solve(varlin::problem::Task::Solve, a),
        Command::Evolve(a) => commands::evolve(a),
        Command::Trajectory(a) => commands::trajectory(a),
        Command::Bench(a) => commands::bench(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(verified) => ExitCode::from(if verified { 0 } else { 2 }),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
