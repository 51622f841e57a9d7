//! The `plr` command line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use clap::{Parser, Subcommand};

pub mod config;
pub mod debias;
pub mod margin;
pub mod score;
pub mod serve;
pub mod simulate;

#[derive(Debug, Parser)]
#[command(
    name = "plr",
    version,
    about = "Score rollouts, debias caption corpora, simulate reward scheduling and analyze evaluator margins"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score rollout JSONL into per-record reward breakdowns.
    Score(score::ScoreArgs),
    /// Filter lexically biased captions from a caption-pair corpus.
    Debias(debias::DebiasArgs),
    /// Compare serial and overlapped step times for stage plans.
    Simulate(simulate::SimulateArgs),
    /// AUC and mean-score gap of labelled evaluator judgments.
    MarginReport(margin::MarginArgs),
    /// Run the deterministic evaluator/verifier mock server.
    ServeMock(serve::ServeArgs),
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Score(a) => score::run(a),
        Command::Debias(a) => debias::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::MarginReport(a) => margin::run(a),
        Command::ServeMock(a) => serve::run(a),
    }
}

/// Opens a file, or stdin for `-`.
pub(crate) fn open_input(path: &Path) -> anyhow::Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Box::new(BufReader::new(f)))
}

/// Creates a file, or stdout when no path is given.
pub(crate) fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}
