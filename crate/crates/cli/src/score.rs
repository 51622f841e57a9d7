use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::Args;
use futures::StreamExt;
use plr_core::format::lenient_evidence;
use plr_core::gateway::{
    parse_endpoint_list, ClientConfig, HttpEvaluator, EVALUATOR_ENDPOINTS_ENV,
    VERIFIER_ENDPOINTS_ENV,
};
use plr_core::reward::{
    score_rollout, FailurePolicy, HalluGate, RewardBreakdown, RewardWeights, RolloutRecord,
    ScoringConfig, TaskKind,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::{split_list, FlatConfig};

const SCHEMA_HELP: &str = "\
Rollout JSONL, one object per line:
  {\"id\": str, \"task\": \"vtg\"|\"mc\"|\"glue\"|\"ro\"|\"oe\", \"question\": str,
   \"video\": {\"path\": str, \"duration_s\": number > 0},
   \"ground_truth\": <per task>, \"response\": str}
ground_truth by task:
  mc   {\"option\": \"B\"}
  vtg  {\"interval\": [start_s, end_s]}
  glue {\"option\": \"B\", \"interval\": [start_s, end_s]}
  ro   {\"order\": [\"e1\", \"e2\", ...]}
  oe   {\"answer\": str}
Output JSONL: {\"id\", \"task\", \"r_acc\", \"r_think_fmt\", \"r_evid_fmt\", \"r_hallu\",
  \"total\", \"per_evidence\": [{start_s, end_s, weight, p_yes, p_no, score}], \"flags\"}
Lines that fail validation in lenient mode become {\"id\", \"line\", \"error\"}.
A summary JSON document is written to stderr.
Endpoint precedence: flags, then --config, then PLR_EVALUATOR_ENDPOINTS /
PLR_VERIFIER_ENDPOINTS.";

#[derive(Debug, Clone, Args)]
#[command(after_long_help = SCHEMA_HELP)]
pub struct ScoreArgs {
    /// Rollout JSONL (`-` reads stdin).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Breakdown JSONL destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Flat TOML file whose keys mirror these flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated evaluator (`/judge`) replicas.
    #[arg(long)]
    pub evaluator_endpoints: Option<String>,
    /// Comma-separated verifier (`/verify`) replicas.
    #[arg(long)]
    pub verifier_endpoints: Option<String>,
    /// Abort on the first invalid line or service failure.
    #[arg(long, conflicts_with = "lenient")]
    pub strict: bool,
    /// Annotate invalid lines and keep going (default).
    #[arg(long)]
    pub lenient: bool,
    /// Records scored concurrently [default: 8].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Accuracy weight [default: 1.0].
    #[arg(long)]
    pub w_acc: Option<f64>,
    /// Think-format weight [default: 0.5].
    #[arg(long)]
    pub w_think: Option<f64>,
    /// Evidence-format weight [default: 0.5].
    #[arg(long)]
    pub w_evid: Option<f64>,
    /// Anti-hallucination weight [default: 0.2].
    #[arg(long)]
    pub w_hallu: Option<f64>,
    /// Task kinds never granted the anti-hallucination term, e.g. `vtg,ro`.
    #[arg(long)]
    pub hallu_gate_exclude: Option<String>,
    /// Give the evidence-format reward to responses without evidence tags.
    #[arg(long)]
    pub allow_empty_evidence: bool,
    /// Per-request timeout in seconds [default: 30].
    #[arg(long)]
    pub timeout_s: Option<f64>,
    /// Retries after a failed request [default: 2].
    #[arg(long)]
    pub retries: Option<u32>,
    /// Requests in flight across all workers [default: 32].
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Try other replicas when one is unreachable.
    #[arg(long)]
    pub failover: bool,
}

#[derive(Debug, Clone)]
pub struct ScoreRunConfig {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub evaluator_endpoints: Vec<String>,
    pub verifier_endpoints: Vec<String>,
    pub strict: bool,
    pub workers: usize,
    pub scoring: ScoringConfig,
    pub client: ClientConfig,
}

fn env_list(var: &str) -> Vec<String> {
    std::env::var(var)
        .map(|v| parse_endpoint_list(&v))
        .unwrap_or_default()
}

fn parse_tasks(items: &[String]) -> anyhow::Result<Vec<TaskKind>> {
    items
        .iter()
        .map(|s| s.parse::<TaskKind>().map_err(anyhow::Error::msg))
        .collect()
}

impl ScoreRunConfig {
    pub fn resolve(args: ScoreArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => FlatConfig::load(p)?,
            None => FlatConfig::default(),
        };

        let endpoints =
            |flag: &Option<String>, key: &str, env: &str| -> anyhow::Result<Vec<String>> {
                if let Some(f) = flag {
                    return Ok(split_list(f));
                }
                if let Some(v) = file.list(key)? {
                    return Ok(v);
                }
                Ok(env_list(env))
            };
        let evaluator_endpoints = endpoints(
            &args.evaluator_endpoints,
            "evaluator-endpoints",
            EVALUATOR_ENDPOINTS_ENV,
        )?;
        let verifier_endpoints = endpoints(
            &args.verifier_endpoints,
            "verifier-endpoints",
            VERIFIER_ENDPOINTS_ENV,
        )?;

        let strict = if args.strict {
            true
        } else if args.lenient {
            false
        } else {
            file.boolean("strict")?.unwrap_or(false)
        };

        let defaults = RewardWeights::default();
        let weight = |flag: Option<f64>, key: &str, d: f64| -> anyhow::Result<f64> {
            Ok(match flag {
                Some(v) => v,
                None => file.float(key)?.unwrap_or(d),
            })
        };
        let weights = RewardWeights {
            accuracy: weight(args.w_acc, "w-acc", defaults.accuracy)?,
            think_format: weight(args.w_think, "w-think", defaults.think_format)?,
            evidence_format: weight(args.w_evid, "w-evid", defaults.evidence_format)?,
            hallucination: weight(args.w_hallu, "w-hallu", defaults.hallucination)?,
        };
        weights.validate().map_err(anyhow::Error::msg)?;

        let excluded = match &args.hallu_gate_exclude {
            Some(s) => parse_tasks(&split_list(s))?,
            None => parse_tasks(&file.list("hallu-gate-exclude")?.unwrap_or_default())?,
        };

        let workers = match args.workers {
            Some(w) => w,
            None => file.uint("workers")?.map_or(8, |w| w as usize),
        };
        if workers == 0 {
            bail!("--workers must be at least 1");
        }

        let mut client = ClientConfig::default();
        let timeout = weight(args.timeout_s, "timeout-s", client.timeout.as_secs_f64())?;
        if !(timeout.is_finite() && timeout > 0.0) {
            bail!("--timeout-s must be positive");
        }
        client.timeout = Duration::from_secs_f64(timeout);
        client.retries = match args.retries {
            Some(r) => r,
            None => file.uint("retries")?.map_or(client.retries, |r| r as u32),
        };
        client.max_in_flight = match args.max_in_flight {
            Some(m) => m,
            None => file
                .uint("max-in-flight")?
                .map_or(client.max_in_flight, |m| m as usize),
        };
        client.failover = args.failover || file.boolean("failover")?.unwrap_or(false);

        let allow_empty_evidence =
            args.allow_empty_evidence || file.boolean("allow-empty-evidence")?.unwrap_or(false);

        Ok(Self {
            input: args.input,
            output: args.output,
            evaluator_endpoints,
            verifier_endpoints,
            strict,
            workers,
            scoring: ScoringConfig {
                weights,
                gate: HalluGate::excluding(excluded),
                allow_empty_evidence,
                failure_policy: if strict {
                    FailurePolicy::Strict
                } else {
                    FailurePolicy::Lenient
                },
            },
            client,
        })
    }
}

#[derive(Serialize)]
struct ScoredLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    breakdown: &'a RewardBreakdown,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    id: Option<&'a str>,
    line: usize,
    error: &'a str,
}

enum Outcome {
    Scored {
        id: String,
        breakdown: RewardBreakdown,
        evidence: usize,
    },
    Invalid {
        line: usize,
        id: Option<String>,
        error: String,
    },
}

#[derive(Debug, Default, Serialize, PartialEq)]
pub struct Summary {
    pub records: usize,
    pub errors: usize,
    pub mean_total: f64,
    pub per_task_mean_total: BTreeMap<String, f64>,
    pub format_failure_rate: f64,
    pub evidence_count_histogram: BTreeMap<usize, usize>,
}

#[derive(Default)]
struct Tally {
    errors: usize,
    totals: Vec<f64>,
    per_task: BTreeMap<String, Vec<f64>>,
    format_failures: usize,
    histogram: BTreeMap<usize, usize>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

impl Tally {
    fn add(&mut self, b: &RewardBreakdown, evidence: usize) {
        self.totals.push(b.total);
        self.per_task
            .entry(b.task.to_string())
            .or_default()
            .push(b.total);
        if b.r_think_fmt == 0 || b.r_evid_fmt == 0 {
            self.format_failures += 1;
        }
        *self.histogram.entry(evidence).or_insert(0) += 1;
    }

    fn summary(&self) -> Summary {
        let n = self.totals.len();
        Summary {
            records: n,
            errors: self.errors,
            mean_total: mean(&self.totals),
            per_task_mean_total: self
                .per_task
                .iter()
                .map(|(k, v)| (k.clone(), mean(v)))
                .collect(),
            format_failure_rate: if n == 0 {
                0.0
            } else {
                self.format_failures as f64 / n as f64
            },
            evidence_count_histogram: self.histogram.clone(),
        }
    }
}

fn id_hint(line: &str) -> Option<String> {
    serde_json::from_str::<Value>(line)
        .ok()?
        .get("id")?
        .as_str()
        .map(str::to_owned)
}

pub fn run(args: ScoreArgs) -> anyhow::Result<()> {
    let cfg = ScoreRunConfig::resolve(args)?;
    let summary = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(score_file(&cfg))?;
    eprintln!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

/// Scores `cfg.input` into `cfg.output` and returns the summary.
pub async fn score_file(cfg: &ScoreRunConfig) -> anyhow::Result<Summary> {
    let evaluator = HttpEvaluator::new(
        cfg.evaluator_endpoints.clone(),
        cfg.verifier_endpoints.clone(),
        cfg.client.clone(),
    )?;
    let input = crate::open_input(&cfg.input)?;
    let mut out = crate::open_output(cfg.output.as_deref())?;

    let lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));

    let evaluator = &evaluator;
    let scoring = &cfg.scoring;
    let mut outcomes = futures::stream::iter(lines)
        .map(|(n, line)| async move {
            let line = line.with_context(|| format!("reading line {n}"))?;
            let record: RolloutRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    return Ok(Outcome::Invalid {
                        line: n,
                        id: id_hint(&line),
                        error: e.to_string(),
                    })
                }
            };
            let breakdown = match score_rollout(&record, evaluator, scoring).await {
                Ok(b) => b,
                Err(e) => {
                    return Ok(Outcome::Invalid {
                        line: n,
                        id: Some(record.id),
                        error: e.to_string(),
                    })
                }
            };
            let evidence = lenient_evidence(&record.response).len();
            anyhow::Ok(Outcome::Scored {
                id: record.id,
                breakdown,
                evidence,
            })
        })
        .buffered(cfg.workers);

    let mut tally = Tally::default();
    while let Some(outcome) = outcomes.next().await {
        match outcome? {
            Outcome::Scored {
                id,
                breakdown,
                evidence,
            } => {
                tally.add(&breakdown, evidence);
                serde_json::to_writer(
                    &mut out,
                    &ScoredLine {
                        id: &id,
                        breakdown: &breakdown,
                    },
                )?;
            }
            Outcome::Invalid { line, id, error } => {
                if cfg.strict {
                    out.flush()?;
                    bail!("line {line}: {error}");
                }
                tally.errors += 1;
                serde_json::to_writer(
                    &mut out,
                    &ErrorLine {
                        id: id.as_deref(),
                        line,
                        error: &error,
                    },
                )?;
            }
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(tally.summary())
}
