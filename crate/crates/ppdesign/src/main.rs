use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ppdesign::runner::{run_benchmark, run_evaluate, run_generate, run_simulate, Overrides};

/// Bayesian D-optimal partial-profile designs for discrete choice
/// experiments.
#[derive(Parser)]
#[command(name = "ppdesign", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (overrides the PPDESIGN_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Prior-draw count override.
    #[arg(long)]
    draws: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a design for a scenario (simulated annealing or the
    /// two-stage coordinate-exchange baseline).
    Generate(RunArgs),
    /// Relative D_B-efficiency of designs against a reference on shared
    /// prior draws.
    Evaluate(RunArgs),
    /// Simulate respondents, refit the model, and compare designs by EMSE.
    Simulate(RunArgs),
    /// Matched-runtime SA-vs-CE races over a scenario grid.
    Benchmark(RunArgs),
}

fn configure_threads(flag: Option<usize>) {
    let threads = flag.or_else(|| {
        std::env::var("PPDESIGN_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    let (args, run): (&RunArgs, fn(&std::path::Path, &std::path::Path, &Overrides) -> ppdesign::Result<()>) =
        match &cli.command {
            Command::Generate(a) => (a, run_generate),
            Command::Evaluate(a) => (a, run_evaluate),
            Command::Simulate(a) => (a, run_simulate),
            Command::Benchmark(a) => (a, run_benchmark),
        };
    let overrides = Overrides { seed: args.seed, num_draws: args.draws };
    match run(&args.config, &args.out, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
