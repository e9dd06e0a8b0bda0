//! The `bqn` command line: benchmark runs, family comparisons, invariance
//! checks and sparse-update demonstrations on top of `bregman-qn`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod generate;
pub mod problems;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;
use export::Format;

/// Seed used when neither `--seed` nor `BQN_SEED` is set.
pub const DEFAULT_SEED: u64 = 42;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bqn", version, about = "Bregman-divergence quasi-Newton benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize one problem with one update family.
    Solve(SolveArgs),
    /// Run several families on several problems and tabulate the results.
    Compare(CompareArgs),
    /// Compare runs on a problem and its linearly transformed copy.
    Invariance(InvarianceArgs),
    /// Run a sparse secant update on a random feasible instance.
    SparseDemo(SparseDemoArgs),
    /// List the benchmark problems.
    ListProblems,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for random problems (default: $BQN_SEED, else 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Record wall-clock time in the outputs.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Update family: bfgs, dfp, selfscale, vbfgs:<potential> or vdfp:<potential>.
    #[arg(long)]
    pub family: Option<String>,
    /// Gradient-norm stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long = "alpha-init")]
    pub alpha_init: Option<f64>,
    #[arg(long = "max-trials")]
    pub max_trials: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Chordal sparsity pattern file for sparse updates.
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// Sparse algorithm (1 or 2); without --pattern the problem's own pattern is used.
    #[arg(long)]
    pub algorithm: Option<u8>,
    /// Inner iterations of the sparse algorithm.
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Also write a gnuplot data file.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Comma-separated problem names.
    #[arg(long, visible_alias = "problem")]
    pub problems: Option<String>,
    /// Comma-separated family names.
    #[arg(long)]
    pub families: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InvarianceArgs {
    #[arg(long)]
    pub problem: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// shear, scale:<det>, random-sl or random-gl:<det>.
    #[arg(long)]
    pub transform: Option<String>,
    /// Number of iterations compared.
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SparseDemoArgs {
    /// Dimension of the default tridiagonal pattern.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// Family whose potential drives the update (default vbfgs:log).
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub algorithm: Option<u8>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Runs the command line with the given arguments (including the program
/// name) and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match commands::dispatch(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
