#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Exact and fast gradients for third-order tensor attention.
#[derive(Parser, Debug)]
#[command(name = "tat", version, about)]
struct Cli {
    /// Worker threads for the parallel kernels; 1 gives bit-reproducible output.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random instance with entries uniform in [-bound, bound].
    Gen(GenArgs),
    /// Compute the gradient with respect to X.
    Grad(GradArgs),
    /// Compare the fast engine, the exact engine and finite differences.
    Check(CheckArgs),
    /// Time an engine over several sequence lengths and emit CSV.
    Bench(BenchArgs),
    /// Evaluate the f(λ) probe on a random hard instance and verify its bounds.
    Probe(ProbeArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    bound: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Engine {
    Exact,
    Fast,
}

#[derive(Args, Debug)]
struct GradArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Engine::Fast)]
    engine: Engine,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Largest accepted ‖fast - exact‖∞.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Central-difference step for the finite-difference comparison.
    #[arg(long, default_value_t = 1e-5)]
    fd_step: f64,
    /// Added to the first fast-gradient entry before comparing.
    #[arg(long, hide = true)]
    perturb: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BenchEngine {
    Exact,
    Fast,
    Both,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated sequence lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = BenchEngine::Fast)]
    engine: BenchEngine,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    bound: f64,
    /// Fill linf_err_vs_exact for fast rows when n is at most this.
    #[arg(long, default_value_t = 64)]
    oracle_max_n: usize,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 3.0)]
    ba: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Riemann-sum resolution for the averaging estimate.
    #[arg(long, default_value_t = 100)]
    t: usize,
    /// Number of λ intervals on [0, 1] for the printed curve.
    #[arg(long, default_value_t = 20)]
    grid: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(commands::EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(commands::EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure worker threads: {e}");
            return ExitCode::from(commands::EXIT_VALIDATION);
        }
    }
    ExitCode::from(commands::run(cli.command))
}
