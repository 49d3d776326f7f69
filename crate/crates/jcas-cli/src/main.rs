//! `jcas`: drive the sensing pipeline end to end. Simulate channel
//! captures, reduce them to Doppler spectrograms, inspect archives, search
//! architectures, train and evaluate recognition models, and run the
//! mechanism studies.
//!
//! Every command works inside one run directory (flag `--run`, env
//! `JCAS_RUN_DIR`) and writes a manifest naming each artifact it produced,
//! so a rerun with identical inputs reproduces identical bytes. Exit codes:
//! 0 ok, 2 spec or configuration error, 3 missing or corrupt data, 4
//! numerical failure.

mod commands;
mod error;
mod index;
mod manifest;
mod specfile;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "jcas", version, about = "Beam-formed channel sensing pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario grid into CSI archives.
    Simulate(commands::simulate::SimulateArgs),
    /// Reduce CSI archives to Doppler spectrogram archives.
    Preprocess(commands::preprocess::PreprocessArgs),
    /// Summarize an archive directory; optionally render a class grid.
    Inspect(commands::inspect::InspectArgs),
    /// Successive-halving architecture search.
    Tune(commands::tune::TuneArgs),
    /// Train one model and persist checkpoint, split, and metrics.
    Train(commands::train::TrainArgs),
    /// Re-score a trained model on a stored split subset.
    Eval(commands::eval::EvalArgs),
    /// Run one of the five mechanism studies (1-5).
    Hypothesis(commands::hypothesis::HypothesisArgs),
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Preprocess(args) => commands::preprocess::run(args),
        Command::Inspect(args) => commands::inspect::run(args),
        Command::Tune(args) => commands::tune::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Hypothesis(args) => commands::hypothesis::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("jcas: {e}");
        std::process::exit(e.exit_code());
    }
}
