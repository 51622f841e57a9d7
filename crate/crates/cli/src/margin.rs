use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use plr_core::margin::{margin_report, LabeledJudgment};

#[derive(Debug, Clone, Args)]
#[command(after_long_help = "\
Input JSONL: {\"p_yes\": number, \"p_no\": number, \"label\": bool} per line;
other fields are ignored. The score of a line is p_yes / (p_yes + p_no) and
label true marks a caption that matches its clip.")]
pub struct MarginArgs {
    /// Labelled judgments JSONL (`-` reads stdin).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn run(args: MarginArgs) -> anyhow::Result<()> {
    let mut items = Vec::new();
    for (i, line) in crate::open_input(&args.input)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading line {}", i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LabeledJudgment>(&line) {
            Ok(j) => items.push(j),
            Err(e) => bail!("line {}: {e}", i + 1),
        }
    }
    let report = margin_report(&items)?;
    let mut out = crate::open_output(args.output.as_deref())?;
    serde_json::to_writer(&mut out, &report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
