use std::path::PathBuf;

use clap::{Parser, Subcommand};

use kosolve::cli::{run, Command};

/// Radial solutions of p-Laplacian systems with gradient terms.
#[derive(Parser, Debug)]
#[command(name = "kosolve", version, about)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Successive approximation on a bounded ball; writes solution.csv and report.json.
    Solve(Common),
    /// Evaluate every integral condition; writes verdicts.json.
    Classify(Common),
    /// Compare the fixed point with the shooting oracle; writes verify.json.
    Verify(Common),
    /// Solve and classify every cell of the configured sweep; writes regimes.csv.
    Sweep(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let (cmd, common) = match args.command {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Classify(c) => (Command::Classify, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    std::process::exit(run(cmd, &common.config, common.out.as_deref()));
}
