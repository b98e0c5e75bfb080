mod bench;
mod manifest;
mod predict;
mod train;

use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ortree", version, about = "Globally optimal fixed-depth regression trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tree on a CSV file and write the model, manifest and bound trace.
    Train(train::TrainArgs),
    /// Re-run a training job from a manifest written by `train`.
    Replay(train::ReplayArgs),
    /// Predict with a saved model.
    Predict(predict::PredictArgs),
    /// Print the upper bound on the number of distinct tree structures.
    Bound(BoundArgs),
    /// Run the solver and the greedy baseline over a suite of datasets.
    Bench(bench::BenchArgs),
}

#[derive(Args)]
struct BoundArgs {
    /// Number of samples.
    #[arg(long)]
    n: u64,
    /// Number of features.
    #[arg(long)]
    p: u64,
    #[arg(long)]
    depth: u32,
}

fn bound(args: &BoundArgs) -> Result<()> {
    if args.n < 2 {
        bail!("--n must be at least 2");
    }
    if args.p < 1 {
        bail!("--p must be at least 1");
    }
    if !(1..=20).contains(&args.depth) {
        bail!("--depth must be in 1..=20");
    }
    println!("{}", ortree::struct_count_upper_bound(args.n, args.p, args.depth));
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(args) => train::run(&args).map(|_| ExitCode::SUCCESS),
        Command::Replay(args) => train::replay(&args).map(|_| ExitCode::SUCCESS),
        Command::Predict(args) => predict::run(&args).map(|_| ExitCode::SUCCESS),
        Command::Bound(args) => bound(&args).map(|_| ExitCode::SUCCESS),
        Command::Bench(args) => bench::run(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
