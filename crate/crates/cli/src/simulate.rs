use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use plr_core::scheduler::{schedule_csv, simulate_schedule, StagePlan};

#[derive(Debug, Clone, Args)]
#[command(after_long_help = "\
Plan files are CSV with columns t_rollout,t_reward,t_logps,t_grad (seconds);
a header row is optional. Output CSV columns:
plan,t_rollout,t_reward,t_logps,t_grad,serial_predicted,serial_measured,
overlapped_predicted,overlapped_measured,speedup")]
pub struct SimulateArgs {
    /// Rollout stage duration in seconds.
    #[arg(
        long,
        allow_negative_numbers = true,
        required_unless_present = "plan_file"
    )]
    pub rollout: Option<f64>,
    /// Reward stage duration in seconds.
    #[arg(
        long,
        allow_negative_numbers = true,
        required_unless_present = "plan_file"
    )]
    pub reward: Option<f64>,
    /// Reference log-probability stage duration in seconds.
    #[arg(
        long,
        allow_negative_numbers = true,
        required_unless_present = "plan_file"
    )]
    pub logps: Option<f64>,
    /// Gradient update duration in seconds.
    #[arg(
        long,
        allow_negative_numbers = true,
        required_unless_present = "plan_file"
    )]
    pub grad: Option<f64>,
    /// CSV of plans, one per row.
    #[arg(long, conflicts_with_all = ["rollout", "reward", "logps", "grad"])]
    pub plan_file: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn plan(values: [f64; 4], row: &str) -> anyhow::Result<StagePlan> {
    StagePlan::new(values[0], values[1], values[2], values[3]).with_context(|| row.to_owned())
}

pub fn read_plan_file(path: &std::path::Path) -> anyhow::Result<Vec<StagePlan>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut plans = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = format!("row {}", i + 1);
        if rec.len() != 4 {
            bail!("{row}: expected 4 columns, found {}", rec.len());
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => plans.push(plan([v[0], v[1], v[2], v[3]], &row)?),
            Err(_) if i == 0 => continue,
            Err(e) => bail!("{row}: {e}"),
        }
    }
    Ok(plans)
}

pub fn run(args: SimulateArgs) -> anyhow::Result<()> {
    let plans = match &args.plan_file {
        Some(p) => read_plan_file(p)?,
        None => {
            let v = [args.rollout, args.reward, args.logps, args.grad].map(|d| d.unwrap_or(0.0));
            vec![plan(v, "plan")?]
        }
    };
    let rows = simulate_schedule(&plans);
    let mut out = crate::open_output(args.output.as_deref())?;
    out.write_all(schedule_csv(&rows).as_bytes())?;
    out.flush()?;

    if let [r] = rows.as_slice() {
        eprintln!(
            "serial {} (formula {}), overlapped {} (formula {}), speedup {:.3}",
            r.serial_measured,
            r.serial_predicted,
            r.overlapped_measured,
            r.overlapped_predicted,
            r.speedup
        );
    } else {
        let mismatches = rows
            .iter()
            .filter(|r| {
                r.serial_measured != r.serial_predicted
                    || r.overlapped_measured != r.overlapped_predicted
            })
            .count();
        let mean_speedup = if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(|r| r.speedup).sum::<f64>() / rows.len() as f64
        };
        eprintln!(
            "{} plans, {} formula mismatches, mean speedup {:.3}",
            rows.len(),
            mismatches,
            mean_speedup
        );
    }
    Ok(())
}
