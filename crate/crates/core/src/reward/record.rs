use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Kind of training task; decides how accuracy is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Temporal grounding.
    Vtg,
    /// Multiple choice.
    Mc,
    /// Multiple choice plus grounding.
    Glue,
    /// Event reordering.
    Ro,
    /// Open-ended.
    Oe,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Vtg,
        TaskKind::Mc,
        TaskKind::Glue,
        TaskKind::Ro,
        TaskKind::Oe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Vtg => "vtg",
            TaskKind::Mc => "mc",
            TaskKind::Glue => "glue",
            TaskKind::Ro => "ro",
            TaskKind::Oe => "oe",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown task kind `{s}` (expected vtg|mc|glue|ro|oe)"))
    }
}

/// Gold answer, shaped by task kind.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Mc {
        option: String,
    },
    Vtg {
        interval: (f64, f64),
    },
    Glue {
        option: String,
        interval: (f64, f64),
    },
    Ro {
        order: Vec<String>,
    },
    Oe {
        answer: String,
    },
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct OptionGt {
    option: String,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct IntervalGt {
    interval: [f64; 2],
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GlueGt {
    option: String,
    interval: [f64; 2],
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct OrderGt {
    order: Vec<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AnswerGt {
    answer: String,
}

fn check_interval(iv: [f64; 2]) -> Result<(f64, f64), String> {
    if !(iv[0].is_finite() && iv[1].is_finite()) || iv[0] < 0.0 || iv[0] > iv[1] {
        return Err(format!("invalid interval [{}, {}]", iv[0], iv[1]));
    }
    Ok((iv[0], iv[1]))
}

fn check_option(option: String) -> Result<String, String> {
    let trimmed = option.trim();
    if trimmed.is_empty() {
        return Err("empty option label".to_owned());
    }
    Ok(trimmed.to_owned())
}

impl GroundTruth {
    pub fn task(&self) -> TaskKind {
        match self {
            GroundTruth::Mc { .. } => TaskKind::Mc,
            GroundTruth::Vtg { .. } => TaskKind::Vtg,
            GroundTruth::Glue { .. } => TaskKind::Glue,
            GroundTruth::Ro { .. } => TaskKind::Ro,
            GroundTruth::Oe { .. } => TaskKind::Oe,
        }
    }

    /// Reads the JSON shape expected for `task`.
    pub fn from_json(task: TaskKind, value: Value) -> Result<Self, String> {
        let shape_err = |e: serde_json::Error| format!("ground_truth for {task}: {e}");
        Ok(match task {
            TaskKind::Mc => {
                let gt: OptionGt = serde_json::from_value(value).map_err(shape_err)?;
                GroundTruth::Mc {
                    option: check_option(gt.option)?,
                }
            }
            TaskKind::Vtg => {
                let gt: IntervalGt = serde_json::from_value(value).map_err(shape_err)?;
                GroundTruth::Vtg {
                    interval: check_interval(gt.interval)?,
                }
            }
            TaskKind::Glue => {
                let gt: GlueGt = serde_json::from_value(value).map_err(shape_err)?;
                GroundTruth::Glue {
                    option: check_option(gt.option)?,
                    interval: check_interval(gt.interval)?,
                }
            }
            TaskKind::Ro => {
                let gt: OrderGt = serde_json::from_value(value).map_err(shape_err)?;
                let order: Vec<String> = gt.order.iter().map(|s| s.trim().to_owned()).collect();
                if order.is_empty() || order.iter().any(String::is_empty) {
                    return Err("ground_truth order must hold non-empty labels".to_owned());
                }
                let mut seen = HashSet::new();
                if !order.iter().all(|id| seen.insert(id.to_lowercase())) {
                    return Err("ground_truth order has duplicate labels".to_owned());
                }
                GroundTruth::Ro { order }
            }
            TaskKind::Oe => {
                let gt: AnswerGt = serde_json::from_value(value).map_err(shape_err)?;
                GroundTruth::Oe { answer: gt.answer }
            }
        })
    }

    pub fn to_json(&self) -> Value {
        let v = match self {
            GroundTruth::Mc { option } => serde_json::to_value(OptionGt {
                option: option.clone(),
            }),
            GroundTruth::Vtg { interval } => serde_json::to_value(IntervalGt {
                interval: [interval.0, interval.1],
            }),
            GroundTruth::Glue { option, interval } => serde_json::to_value(GlueGt {
                option: option.clone(),
                interval: [interval.0, interval.1],
            }),
            GroundTruth::Ro { order } => serde_json::to_value(OrderGt {
                order: order.clone(),
            }),
            GroundTruth::Oe { answer } => serde_json::to_value(AnswerGt {
                answer: answer.clone(),
            }),
        };
        v.unwrap_or(Value::Null)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoRef {
    pub path: String,
    pub duration_s: f64,
}

/// One sampled response plus everything needed to score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRollout", into = "RawRollout")]
pub struct RolloutRecord {
    pub id: String,
    pub task: TaskKind,
    pub question: String,
    pub video: VideoRef,
    pub ground_truth: GroundTruth,
    pub response: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRollout {
    id: String,
    task: TaskKind,
    question: String,
    video: VideoRef,
    ground_truth: Value,
    response: String,
}

impl TryFrom<RawRollout> for RolloutRecord {
    type Error = String;

    fn try_from(raw: RawRollout) -> Result<Self, Self::Error> {
        if !(raw.video.duration_s.is_finite() && raw.video.duration_s > 0.0) {
            return Err(format!(
                "video duration must be > 0, got {}",
                raw.video.duration_s
            ));
        }
        if raw.response.is_empty() {
            return Err("response is empty".to_owned());
        }
        let ground_truth = GroundTruth::from_json(raw.task, raw.ground_truth)?;
        Ok(Self {
            id: raw.id,
            task: raw.task,
            question: raw.question,
            video: raw.video,
            ground_truth,
            response: raw.response,
        })
    }
}

impl From<RolloutRecord> for RawRollout {
    fn from(r: RolloutRecord) -> Self {
        Self {
            id: r.id,
            task: r.task,
            question: r.question,
            ground_truth: r.ground_truth.to_json(),
            video: r.video,
            response: r.response,
        }
    }
}
