use std::path::PathBuf;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod exit;
mod setup;

use config::Config;

/// Probabilistic iterative methods from traced affine solvers.
#[derive(Debug, Parser)]
#[command(name = "affine-pim", version)]
struct Cli {
    /// TOML configuration file; defaults apply to anything not set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Without it, JSON goes to stdout and CSV to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace the configured method and dump the graph as JSON.
    Trace {
        /// Apply the traced step to this vector (comma list, `zeros` or `ones`).
        #[arg(long)]
        eval: Option<String>,
    },
    /// Time the traced and hand-written probabilistic two-grid cycles.
    BenchTracer,
    /// Monte-Carlo calibration report for the configured method.
    Calibrate,
    /// Remove the inverse of A from the configured step and report the result.
    Simplify {
        /// Print the input and extracted expressions.
        #[arg(long)]
        dump_expr: bool,
        /// Compare the compiled `V·M` against a dense oracle.
        #[arg(long)]
        eval: bool,
    },
    /// Run the computation-aware GP experiment.
    Cagp,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out = commands::Output::new(cli.out)?;
    match cli.command {
        Command::Trace { eval } => commands::trace::run(&cfg, &out, eval.as_deref()),
        Command::BenchTracer => commands::bench::run(&cfg, &out),
        Command::Calibrate => commands::calibrate::run(&cfg, &out),
        Command::Simplify { dump_expr, eval } => {
            commands::simplify::run(&cfg, &out, dump_expr, eval)
        }
        Command::Cagp => commands::cagp::run(&cfg, &out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit::code_for(&err));
    }
    std::process::exit(exit::OK);
}
