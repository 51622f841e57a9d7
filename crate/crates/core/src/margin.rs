//! How well evaluator scores separate correct captions from wrong ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MarginError {
    #[error("no judgments labelled {0}")]
    EmptyClass(bool),
    #[error("judgment {index}: p_yes and p_no must be finite, non-negative and not both zero")]
    InvalidProbability { index: usize },
}

/// One evaluator output with its gold label (`true` = caption matches).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledJudgment {
    pub p_yes: f64,
    pub p_no: f64,
    pub label: bool,
}

impl LabeledJudgment {
    pub fn score(&self) -> Option<f64> {
        let ok = |p: f64| p.is_finite() && p >= 0.0;
        (ok(self.p_yes) && ok(self.p_no) && self.p_yes + self.p_no > 0.0)
            .then(|| self.p_yes / (self.p_yes + self.p_no))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub auc: f64,
    pub mean_reward_yes: f64,
    pub mean_reward_no: f64,
    pub gap: f64,
    pub n_yes: usize,
    pub n_no: usize,
}

/// ROC AUC via the rank-sum statistic; ties count one half.
pub fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * all[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn margin_from_scores(pos: &[f64], neg: &[f64]) -> Result<MarginReport, MarginError> {
    if pos.is_empty() {
        return Err(MarginError::EmptyClass(true));
    }
    if neg.is_empty() {
        return Err(MarginError::EmptyClass(false));
    }
    let (mean_reward_yes, mean_reward_no) = (mean(pos), mean(neg));
    Ok(MarginReport {
        auc: auc(pos, neg),
        mean_reward_yes,
        mean_reward_no,
        gap: mean_reward_yes - mean_reward_no,
        n_yes: pos.len(),
        n_no: neg.len(),
    })
}

pub fn margin_report(items: &[LabeledJudgment]) -> Result<MarginReport, MarginError> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (index, j) in items.iter().enumerate() {
        let s = j.score().ok_or(MarginError::InvalidProbability { index })?;
        if j.label {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    margin_from_scores(&pos, &neg)
}
