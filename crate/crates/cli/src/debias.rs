use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use plr_core::debias::{debias_run_indices, CaptionPairRecord, FilterConfig, RateBase};

const SCHEMA_HELP: &str = "\
Input JSONL, one caption pair per line:
  {\"id\": str, \"video_id\": str, \"start_s\": number, \"end_s\": number,
   \"positive\": str, \"negative\": str,
   \"hallucination_type\": \"AttributeModification\" | \"QuantityModification\" |
     \"ActionSubstitution\" | \"DetailConflation\" | \"TemporalReordering\"}
Surviving input lines are copied unchanged to --output. Any malformed line
aborts the run.";

#[derive(Debug, Clone, Args)]
#[command(after_long_help = SCHEMA_HELP)]
pub struct DebiasArgs {
    /// Caption-pair JSONL (`-` reads stdin).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Filtered JSONL destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Where to write the per-iteration report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Filtering rounds.
    #[arg(long, default_value_t = 15)]
    pub n_iter: usize,
    /// Fraction of captions removed per side per round, in (0, 1).
    #[arg(long, default_value_t = 0.02)]
    pub pct: f64,
    /// Size of the biased vocabulary per side.
    #[arg(long, default_value_t = 30)]
    pub top_n: usize,
    /// Apply --pct to the current side size or the original one.
    #[arg(long, default_value = "current", value_parser = ["current", "original"])]
    pub rate_base: String,
}

pub fn run(args: DebiasArgs) -> anyhow::Result<()> {
    let config = FilterConfig {
        n_iter: args.n_iter,
        pct_per_iter: args.pct,
        top_n: args.top_n,
        rate_base: if args.rate_base == "original" {
            RateBase::Original
        } else {
            RateBase::Current
        },
    };
    config.validate()?;

    let mut raw = Vec::new();
    let mut records = Vec::new();
    for (i, line) in crate::open_input(&args.input)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading line {}", i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        match CaptionPairRecord::from_json_line(&line) {
            Ok(r) => records.push(r),
            Err(e) => bail!("line {}: {e}", i + 1),
        }
        raw.push(line);
    }

    let (kept, report) = debias_run_indices(&records, &config)?;

    let mut out = crate::open_output(args.output.as_deref())?;
    for i in kept {
        out.write_all(raw[i].as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    if let Some(path) = &args.report {
        let mut doc = serde_json::to_string_pretty(&report)?;
        doc.push('\n');
        std::fs::write(path, doc).with_context(|| format!("cannot write {}", path.display()))?;
    }

    for it in &report.iterations {
        eprintln!(
            "iter {:>2}: MAP {:.6} -> {:.6}  removed {} pos / {} neg  remaining {} / {}",
            it.iteration,
            it.map_before,
            it.map_after,
            it.removed_pos_ids.len(),
            it.removed_neg_ids.len(),
            it.remaining_pos,
            it.remaining_neg
        );
    }
    eprintln!(
        "kept {} of {} pairs",
        report.output_pairs, report.input_pairs
    );
    Ok(())
}
