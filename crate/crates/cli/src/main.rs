//! `amod`: ingest trip data, train forecasters, simulate and compare
//! rebalancing engines.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.

mod config;
mod data;
mod ingest;
mod report;
mod simulate;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "amod", version, about = "Robust vehicle rebalancing for mobility-on-demand fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a trip file and write per-day demand and network files.
    Ingest(ingest::IngestArgs),
    /// Train a demand forecaster and write its metric table.
    Train(train::TrainArgs),
    /// Simulate one day with one engine.
    Simulate(simulate::SimulateArgs),
    /// Simulate a grid of engines and robust parameters.
    Compare(simulate::CompareArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => ingest::run(a),
        Command::Train(a) => train::run(a),
        Command::Simulate(a) => simulate::simulate(a),
        Command::Compare(a) => simulate::compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
