//! Reward components for a single rollout and their weighted total.
//!
//! ```text
//! R   = R_acc + 0.5 R_think + 0.5 R_evid + 0.2 R_hallu
//! R_h = 1 / max(0.6 + 0.8 n, n) * sum_i w_i * p_yes_i / (p_yes_i + p_no_i)
//! w_i = 1 - max_{j != i} IoU(e_i, e_j) * ROUGE-L(desc_i, desc_j)
//! ```
//!
//! `R_hallu` is only granted when `R_acc > 0.5` and the task kind is in the
//! gate set.

pub mod answer;
mod record;
mod score;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::Evidence;
use crate::gateway::{GatewayError, Judgment};
use crate::metrics::{temporal_iou, InvalidInterval};

pub use record::{GroundTruth, RolloutRecord, TaskKind, VideoRef};
pub use score::score_rollout;

/// Accuracy above which the anti-hallucination term is granted.
pub const HALLU_ACCURACY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("could not extract {0} from the answer")]
    UnparseableAnswer(&'static str),
    #[error("open-ended accuracy needs a verifier judgment")]
    MissingVerdict,
    #[error("ground truth is for {found}, task is {expected}")]
    GroundTruthMismatch { expected: TaskKind, found: TaskKind },
    #[error("anti-hallucination reward needs at least one evidence")]
    EmptyEvidence,
    #[error("{evidence} evidence but {judgments} judgments")]
    LengthMismatch { evidence: usize, judgments: usize },
    #[error(transparent)]
    Interval(#[from] InvalidInterval),
    #[error("evaluator failure: {0}")]
    Gateway(#[from] GatewayError),
}

/// Weights of the four reward terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub accuracy: f64,
    pub think_format: f64,
    pub evidence_format: f64,
    pub hallucination: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            accuracy: 1.0,
            think_format: 0.5,
            evidence_format: 0.5,
            hallucination: 0.2,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.accuracy,
            self.think_format,
            self.evidence_format,
            self.hallucination,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(format!(
                "reward weights must be finite and non-negative: {all:?}"
            ));
        }
        Ok(())
    }
}

/// Task kinds for which the anti-hallucination term may be granted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalluGate {
    allowed: BTreeSet<TaskKind>,
}

impl Default for HalluGate {
    fn default() -> Self {
        Self {
            allowed: TaskKind::ALL.into_iter().collect(),
        }
    }
}

impl HalluGate {
    pub fn excluding(excluded: impl IntoIterator<Item = TaskKind>) -> Self {
        let mut gate = Self::default();
        for k in excluded {
            gate.allowed.remove(&k);
        }
        gate
    }

    pub fn permits(&self, task: TaskKind) -> bool {
        self.allowed.contains(&task)
    }

    /// True when `r_acc` clears the threshold and `task` is in the gate set.
    pub fn admits(&self, task: TaskKind, r_acc: f64) -> bool {
        r_acc > HALLU_ACCURACY_THRESHOLD && self.permits(task)
    }
}

/// What to do when an evaluator or verifier call fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailurePolicy {
    /// Drop the affected term and flag the record.
    #[default]
    Lenient,
    /// Abort.
    Strict,
}

#[derive(Debug, Clone, Default)]
pub struct ScoringConfig {
    pub weights: RewardWeights,
    pub gate: HalluGate,
    pub allow_empty_evidence: bool,
    pub failure_policy: FailurePolicy,
}

/// Per-evidence detail of the anti-hallucination term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceScore {
    pub start_s: f64,
    pub end_s: f64,
    pub weight: f64,
    pub p_yes: Option<f64>,
    pub p_no: Option<f64>,
    /// `weight * p_yes / (p_yes + p_no)`; `None` when the judgment failed.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub task: TaskKind,
    pub r_acc: f64,
    pub r_think_fmt: u8,
    pub r_evid_fmt: u8,
    pub r_hallu: Option<f64>,
    pub total: f64,
    pub per_evidence: Vec<EvidenceScore>,
    /// Non-fatal conditions met while scoring, e.g. `unparseable_answer`.
    pub flags: Vec<String>,
}

/// Accuracy term for one answer.
///
/// VTG scores IoU, MC exact option match, OE `p_correct / (p_correct +
/// p_incorrect)` from the verifier, RO exact order match, and GLUE the sum
/// of option match and IoU. For GLUE a missing option or interval counts 0
/// for that half; the call only fails when neither can be read.
pub fn accuracy_reward(
    task: TaskKind,
    answer_text: &str,
    gt: &GroundTruth,
    verdict: Option<&Judgment>,
) -> Result<f64, RewardError> {
    if gt.task() != task {
        return Err(RewardError::GroundTruthMismatch {
            expected: task,
            found: gt.task(),
        });
    }
    match gt {
        GroundTruth::Vtg { interval } => {
            let pred = answer::extract_interval(answer_text)
                .ok_or(RewardError::UnparseableAnswer("an interval"))?;
            Ok(temporal_iou(*interval, pred)?)
        }
        GroundTruth::Mc { option } => {
            let pred = answer::extract_option(answer_text)
                .ok_or(RewardError::UnparseableAnswer("an option letter"))?;
            Ok(option_match(option, pred))
        }
        GroundTruth::Oe { .. } => {
            let v = verdict.ok_or(RewardError::MissingVerdict)?;
            Ok(v.p_yes / (v.p_no + v.p_yes))
        }
        GroundTruth::Glue { option, interval } => {
            let letter = answer::extract_option(answer_text);
            let iv = answer::extract_interval(answer_text);
            if letter.is_none() && iv.is_none() {
                return Err(RewardError::UnparseableAnswer(
                    "an option letter or interval",
                ));
            }
            let matched = letter.map_or(0.0, |c| option_match(option, c));
            let iou = match iv {
                Some(pred) => temporal_iou(*interval, pred)?,
                None => 0.0,
            };
            Ok(matched + iou)
        }
        GroundTruth::Ro { order } => {
            let pred = answer::extract_order(answer_text, order);
            if pred.is_empty() {
                return Err(RewardError::UnparseableAnswer("an event order"));
            }
            Ok(if pred == *order { 1.0 } else { 0.0 })
        }
    }
}

fn option_match(gold: &str, pred: char) -> f64 {
    let mut buf = [0u8; 4];
    if gold.trim().eq_ignore_ascii_case(pred.encode_utf8(&mut buf)) {
        1.0
    } else {
        0.0
    }
}

/// `w_i = 1 - max_{j != i}(IoU(e_i, e_j) * ROUGE-L(desc_i, desc_j))`, with
/// the max over an empty set taken as 0.
pub fn attenuation_weights(evidence: &[Evidence]) -> Vec<f64> {
    let tokens: Vec<Vec<String>> = evidence
        .iter()
        .map(|e| crate::text::tokenize(&e.desc))
        .collect();
    (0..evidence.len())
        .map(|i| {
            let overlap = (0..evidence.len())
                .filter(|&j| j != i)
                .map(|j| {
                    // Evidence intervals are validated on construction.
                    let iou =
                        temporal_iou(evidence[i].interval(), evidence[j].interval()).unwrap_or(0.0);
                    iou * crate::metrics::rouge_l_tokens(&tokens[i], &tokens[j])
                })
                .fold(0.0_f64, f64::max);
            1.0 - overlap
        })
        .collect()
}

/// `max(0.6 + 0.8 n, n)`, evaluated as `(6 + 8n) / 10` so that the
/// values 1.4, 2.2 and `n` (for `n >= 3`) come out exactly.
pub fn evidence_normalizer(n: usize) -> f64 {
    let n_f = n as f64;
    ((6.0 + 8.0 * n_f) / 10.0).max(n_f)
}

/// Normalized weighted sum given per-evidence weights and
/// `p_yes / (p_yes + p_no)` ratios.
pub fn weighted_evidence_score(weights: &[f64], ratios: &[f64]) -> Result<f64, RewardError> {
    if weights.len() != ratios.len() {
        return Err(RewardError::LengthMismatch {
            evidence: weights.len(),
            judgments: ratios.len(),
        });
    }
    if weights.is_empty() {
        return Err(RewardError::EmptyEvidence);
    }
    // Summing in sorted order makes the result independent of evidence order.
    let mut terms: Vec<f64> = weights.iter().zip(ratios).map(|(w, r)| w * r).collect();
    terms.sort_by(f64::total_cmp);
    let sum: f64 = terms.iter().sum();
    Ok(sum / evidence_normalizer(weights.len()))
}

/// Anti-hallucination reward for a set of evidence and their judgments.
pub fn anti_hallucination_reward(
    evidence: &[Evidence],
    judgments: &[Judgment],
) -> Result<f64, RewardError> {
    if evidence.len() != judgments.len() {
        return Err(RewardError::LengthMismatch {
            evidence: evidence.len(),
            judgments: judgments.len(),
        });
    }
    let weights = attenuation_weights(evidence);
    let ratios: Vec<f64> = judgments.iter().map(Judgment::positive_ratio).collect();
    weighted_evidence_score(&weights, &ratios)
}

/// Inputs to [`total_reward`].
#[derive(Debug, Clone, PartialEq)]
pub struct RewardParts {
    pub task: TaskKind,
    pub r_acc: f64,
    pub r_think_fmt: u8,
    pub r_evid_fmt: u8,
    /// Candidate anti-hallucination reward; dropped unless the gate admits it.
    pub r_hallu: Option<f64>,
    pub per_evidence: Vec<EvidenceScore>,
}

/// Applies the gate and the weighted sum.
pub fn total_reward(
    parts: RewardParts,
    weights: &RewardWeights,
    gate: &HalluGate,
) -> RewardBreakdown {
    let r_hallu = parts
        .r_hallu
        .filter(|_| gate.admits(parts.task, parts.r_acc));
    let total = weights.accuracy * parts.r_acc
        + weights.think_format * f64::from(parts.r_think_fmt)
        + weights.evidence_format * f64::from(parts.r_evid_fmt)
        + weights.hallucination * r_hallu.unwrap_or(0.0);
    RewardBreakdown {
        task: parts.task,
        r_acc: parts.r_acc,
        r_think_fmt: parts.r_think_fmt,
        r_evid_fmt: parts.r_evid_fmt,
        r_hallu,
        total,
        per_evidence: parts.per_evidence,
        flags: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: f64, e: f64, d: &str) -> Evidence {
        Evidence::new(s, e, d).unwrap()
    }

    fn j(y: f64, n: f64) -> Judgment {
        Judgment::new(y, n).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn accuracy_examples() {
        let mc = GroundTruth::Mc { option: "B".into() };
        assert_eq!(accuracy_reward(TaskKind::Mc, "B", &mc, None).unwrap(), 1.0);
        assert_eq!(accuracy_reward(TaskKind::Mc, "C", &mc, None).unwrap(), 0.0);
        assert_eq!(
            accuracy_reward(TaskKind::Mc, "none", &mc, None),
            Err(RewardError::UnparseableAnswer("an option letter"))
        );

        let glue = GroundTruth::Glue {
            option: "B".into(),
            interval: (5.0, 15.0),
        };
        let r = accuracy_reward(TaskKind::Glue, "B, [0, 10]", &glue, None).unwrap();
        assert!(close(r, 1.0 + 1.0 / 3.0, 1e-12));
        let r = accuracy_reward(TaskKind::Glue, "C [5, 15]", &glue, None).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(
            accuracy_reward(TaskKind::Glue, "B", &glue, None).unwrap(),
            1.0
        );

        let oe = GroundTruth::Oe { answer: "x".into() };
        assert_eq!(
            accuracy_reward(TaskKind::Oe, "x", &oe, Some(&j(0.9, 0.1))).unwrap(),
            0.9
        );
        assert_eq!(
            accuracy_reward(TaskKind::Oe, "x", &oe, None),
            Err(RewardError::MissingVerdict)
        );

        let vtg = GroundTruth::Vtg {
            interval: (0.0, 10.0),
        };
        assert_eq!(
            accuracy_reward(TaskKind::Vtg, "0 to 10", &vtg, None).unwrap(),
            1.0
        );

        let ro = GroundTruth::Ro {
            order: vec!["2".into(), "1".into(), "3".into()],
        };
        assert_eq!(
            accuracy_reward(TaskKind::Ro, "2, 1, 3", &ro, None).unwrap(),
            1.0
        );
        assert_eq!(
            accuracy_reward(TaskKind::Ro, "1, 2, 3", &ro, None).unwrap(),
            0.0
        );
        assert_eq!(
            accuracy_reward(TaskKind::Ro, "2, 1", &ro, None).unwrap(),
            0.0
        );

        assert!(matches!(
            accuracy_reward(TaskKind::Vtg, "B", &mc, None),
            Err(RewardError::GroundTruthMismatch { .. })
        ));
    }

    #[test]
    fn attenuation_examples() {
        assert_eq!(attenuation_weights(&[ev(0.0, 1.0, "x")]), vec![1.0]);
        let dup = [ev(0.0, 4.0, "a man runs"), ev(0.0, 4.0, "a man runs")];
        assert_eq!(attenuation_weights(&dup), vec![0.0, 0.0]);
        let w = attenuation_weights(&[ev(0.0, 10.0, "a b c"), ev(5.0, 15.0, "a c")]);
        let want = 1.0 - (1.0 / 3.0) * 0.8;
        assert!(close(w[0], want, 1e-12) && close(w[1], want, 1e-12));
        assert!(close(want, 0.7333, 1e-4));
    }

    #[test]
    fn normalizer_values() {
        assert_eq!(evidence_normalizer(1), 1.4);
        assert_eq!(evidence_normalizer(2), 2.2);
        for n in 3..200 {
            assert_eq!(evidence_normalizer(n), n as f64);
        }
    }

    #[test]
    fn anti_hallucination_examples() {
        let r = anti_hallucination_reward(&[ev(0.0, 1.0, "x")], &[j(0.9, 0.1)]).unwrap();
        assert!(close(r, 0.9 / 1.4, 1e-15));
        assert!(close(r, 0.6429, 1e-4));

        let three = [ev(0.0, 1.0, "a"), ev(2.0, 3.0, "b"), ev(4.0, 5.0, "c")];
        let r = anti_hallucination_reward(&three, &[j(1.0, 0.0); 3]).unwrap();
        assert_eq!(r, 1.0);

        let two = [ev(0.0, 10.0, "a b c"), ev(5.0, 15.0, "a c")];
        let r = anti_hallucination_reward(&two, &[j(1.0, 0.0); 2]).unwrap();
        assert!(close(r, 0.6667, 1e-4));

        assert_eq!(
            anti_hallucination_reward(&[], &[]),
            Err(RewardError::EmptyEvidence)
        );
        assert!(matches!(
            anti_hallucination_reward(&three, &[j(1.0, 0.0)]),
            Err(RewardError::LengthMismatch { .. })
        ));
    }

    fn parts(task: TaskKind, r_acc: f64, t: u8, e: u8, h: Option<f64>) -> RewardParts {
        RewardParts {
            task,
            r_acc,
            r_think_fmt: t,
            r_evid_fmt: e,
            r_hallu: h,
            per_evidence: vec![],
        }
    }

    #[test]
    fn total_examples() {
        let w = RewardWeights::default();
        let g = HalluGate::default();
        let b = total_reward(parts(TaskKind::Mc, 1.0, 1, 1, Some(0.8)), &w, &g);
        assert!(close(b.total, 2.16, 1e-12));
        assert_eq!(b.r_hallu, Some(0.8));

        let b = total_reward(parts(TaskKind::Mc, 0.4, 1, 1, Some(0.8)), &w, &g);
        assert_eq!(b.r_hallu, None);
        assert_eq!(b.total, 0.4 + 0.5 + 0.5);

        let b = total_reward(parts(TaskKind::Oe, 0.5, 1, 0, Some(1.0)), &w, &g);
        assert_eq!(b.r_hallu, None);

        assert_eq!(
            total_reward(parts(TaskKind::Ro, 0.0, 0, 0, None), &w, &g).total,
            0.0
        );

        let g = HalluGate::excluding([TaskKind::Vtg, TaskKind::Glue]);
        let b = total_reward(parts(TaskKind::Vtg, 0.9, 1, 1, Some(1.0)), &w, &g);
        assert_eq!(b.r_hallu, None);
    }

    #[test]
    fn default_weights() {
        let w = RewardWeights::default();
        assert_eq!(
            (
                w.accuracy,
                w.think_format,
                w.evidence_format,
                w.hallucination
            ),
            (1.0, 0.5, 0.5, 0.2)
        );
        assert!(RewardWeights {
            accuracy: -1.0,
            ..w
        }
        .validate()
        .is_err());
    }
}
