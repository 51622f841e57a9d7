//! Lexical debiasing of positive/negative caption pairs.
//!
//! Words that are over-represented on one side get a relative ratio
//! `R_neg(w) = f_neg(w) / max(f_pos(w), 1)` (and symmetrically for the
//! positive side). The `top_n` words by ratio are normalized into penalties
//! in `(0, 1]`, captions are scored by the sum of penalties over their
//! distinct words, and the highest scoring captions on each side are
//! removed. After the last iteration only pairs whose two captions both
//! survived are kept.
//!
//! Polarity is tracked with a smoothed log-odds score per word and its mean
//! absolute value over the vocabulary (MAP).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum DebiasError {
    #[error("no word with a positive ratio")]
    EmptyVocabulary,
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HallucinationType {
    #[serde(alias = "attribute_modification")]
    AttributeModification,
    #[serde(alias = "quantity_modification")]
    QuantityModification,
    #[serde(alias = "action_substitution")]
    ActionSubstitution,
    #[serde(alias = "detail_conflation")]
    DetailConflation,
    #[serde(alias = "temporal_reordering")]
    TemporalReordering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionPairRecord {
    pub id: String,
    pub video_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub positive: String,
    pub negative: String,
    pub hallucination_type: HallucinationType,
}

impl CaptionPairRecord {
    pub fn validate(&self) -> Result<(), DebiasError> {
        let bad = |reason: &str| {
            Err(DebiasError::InvalidRecord {
                id: self.id.clone(),
                reason: reason.to_owned(),
            })
        };
        if !self.start_s.is_finite() || !self.end_s.is_finite() || self.start_s < 0.0 {
            return bad("timestamps must be finite and non-negative");
        }
        if self.start_s > self.end_s {
            return bad("start_s exceeds end_s");
        }
        if self.positive.trim().is_empty() || self.negative.trim().is_empty() {
            return bad("empty caption");
        }
        Ok(())
    }

    /// Parses and validates one JSONL line.
    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let rec: CaptionPairRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        rec.validate().map_err(|e| e.to_string())?;
        Ok(rec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Positive => Side::Negative,
            Side::Negative => Side::Positive,
        }
    }
}

/// Token counts for each side.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VocabStats {
    pub f_pos: BTreeMap<String, u64>,
    pub f_neg: BTreeMap<String, u64>,
}

impl VocabStats {
    pub fn from_corpora<P, N>(positive: P, negative: N) -> Self
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        VocabStats {
            f_pos: word_frequencies(positive),
            f_neg: word_frequencies(negative),
        }
    }

    pub fn counts(&self, side: Side) -> &BTreeMap<String, u64> {
        match side {
            Side::Positive => &self.f_pos,
            Side::Negative => &self.f_neg,
        }
    }

    fn counts_mut(&mut self, side: Side) -> &mut BTreeMap<String, u64> {
        match side {
            Side::Positive => &mut self.f_pos,
            Side::Negative => &mut self.f_neg,
        }
    }

    pub fn add_tokens<S: AsRef<str>>(&mut self, side: Side, tokens: &[S]) {
        let map = self.counts_mut(side);
        for t in tokens {
            *map.entry(t.as_ref().to_owned()).or_insert(0) += 1;
        }
    }

    pub fn count(&self, side: Side, word: &str) -> u64 {
        self.counts(side).get(word).copied().unwrap_or(0)
    }

    pub fn total(&self, side: Side) -> u64 {
        self.counts(side).values().sum()
    }

    pub fn vocabulary(&self) -> BTreeSet<&str> {
        self.f_pos
            .keys()
            .chain(self.f_neg.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn swapped(&self) -> VocabStats {
        VocabStats {
            f_pos: self.f_neg.clone(),
            f_neg: self.f_pos.clone(),
        }
    }
}

pub fn word_frequencies<I>(captions: I) -> BTreeMap<String, u64>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut out = BTreeMap::new();
    for c in captions {
        for t in tokenize(c.as_ref()) {
            *out.entry(t).or_insert(0) += 1;
        }
    }
    out
}

/// `f_side(w) / max(f_other(w), 1)` for every word in the vocabulary.
pub fn relative_ratio(stats: &VocabStats, side: Side) -> BTreeMap<String, f64> {
    stats
        .vocabulary()
        .into_iter()
        .map(|w| {
            let own = stats.count(side, w) as f64;
            let other = stats.count(side.other(), w).max(1) as f64;
            (w.to_owned(), own / other)
        })
        .collect()
}

fn by_value_then_word(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Top `top_n` words by ratio (ties lexicographic), each divided by the
/// largest selected ratio.
pub fn penalty_map(
    ratios: &BTreeMap<String, f64>,
    top_n: usize,
) -> Result<BTreeMap<String, f64>, DebiasError> {
    if top_n == 0 {
        return Err(DebiasError::InvalidConfig("top_n must be positive".into()));
    }
    let mut ranked: Vec<(String, f64)> = ratios
        .iter()
        .filter(|(_, r)| r.is_finite() && **r > 0.0)
        .map(|(w, r)| (w.clone(), *r))
        .collect();
    if ranked.is_empty() {
        return Err(DebiasError::EmptyVocabulary);
    }
    ranked.sort_by(by_value_then_word);
    ranked.truncate(top_n);
    let max = ranked[0].1;
    Ok(ranked.into_iter().map(|(w, r)| (w, r / max)).collect())
}

fn score_tokens<S: AsRef<str>>(tokens: &[S], penalties: &BTreeMap<String, f64>) -> f64 {
    let distinct: BTreeSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
    distinct.into_iter().filter_map(|t| penalties.get(t)).sum()
}

/// Sum of penalties over the caption's distinct tokens.
pub fn caption_bias_score(caption: &str, penalties: &BTreeMap<String, f64>) -> f64 {
    score_tokens(&tokenize(caption), penalties)
}

/// `ln P(w|pos) - ln P(w|neg)` with `P(w|D) = (count_D(w) + 1) / (total_D + V)`.
pub fn log_odds_score(word: &str, stats: &VocabStats) -> f64 {
    let v = stats.vocabulary().len() as f64;
    log_odds_with_vocab(word, stats, v)
}

fn log_odds_with_vocab(word: &str, stats: &VocabStats, v: f64) -> f64 {
    let p = |side: Side| {
        let denom = stats.total(side) as f64 + v;
        if denom == 0.0 {
            return 0.0;
        }
        ((stats.count(side, word) as f64 + 1.0) / denom).ln()
    };
    p(Side::Positive) - p(Side::Negative)
}

/// Mean absolute log-odds over the vocabulary.
pub fn map_score(stats: &VocabStats) -> Result<f64, DebiasError> {
    let vocab = stats.vocabulary();
    if vocab.is_empty() {
        return Err(DebiasError::EmptyVocabulary);
    }
    let v = vocab.len() as f64;
    let (tp, tn) = (
        stats.total(Side::Positive) as f64,
        stats.total(Side::Negative) as f64,
    );
    let sum: f64 = vocab
        .iter()
        .map(|w| {
            let cp = stats.count(Side::Positive, w) as f64;
            let cn = stats.count(Side::Negative, w) as f64;
            (((cp + 1.0) / (tp + v)).ln() - ((cn + 1.0) / (tn + v)).ln()).abs()
        })
        .sum();
    Ok(sum / v)
}

/// Which set size the per-iteration fraction is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateBase {
    #[default]
    Current,
    Original,
}

impl fmt::Display for RateBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateBase::Current => "current",
            RateBase::Original => "original",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub n_iter: usize,
    pub pct_per_iter: f64,
    pub top_n: usize,
    pub rate_base: RateBase,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            n_iter: 15,
            pct_per_iter: 0.02,
            top_n: 30,
            rate_base: RateBase::Current,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), DebiasError> {
        if !(self.pct_per_iter > 0.0 && self.pct_per_iter < 1.0) {
            return Err(DebiasError::InvalidConfig(format!(
                "pct_per_iter must be in (0, 1), got {}",
                self.pct_per_iter
            )));
        }
        if self.top_n == 0 {
            return Err(DebiasError::InvalidConfig("top_n must be positive".into()));
        }
        Ok(())
    }

    /// Captions to remove from a side with `alive` remaining out of
    /// `original`.
    pub fn removal_count(&self, alive: usize, original: usize) -> usize {
        let base = match self.rate_base {
            RateBase::Current => alive,
            RateBase::Original => original,
        };
        // absorb representation error so 0.02 * 2000 stays 40
        let k = (self.pct_per_iter * base as f64 - 1e-9).ceil().max(0.0) as usize;
        k.min(alive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasWord {
    pub word: String,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Removed record ids, highest score first.
    pub removed_pos_ids: Vec<String>,
    pub removed_neg_ids: Vec<String>,
    pub top_bias_words_pos: Vec<BiasWord>,
    pub top_bias_words_neg: Vec<BiasWord>,
    pub map_before: f64,
    pub map_after: f64,
    pub remaining_pos: usize,
    pub remaining_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub config: FilterConfig,
    pub input_pairs: usize,
    pub output_pairs: usize,
    pub surviving_pos: usize,
    pub surviving_neg: usize,
    pub iterations: Vec<IterationRecord>,
}

impl BiasReport {
    pub fn map_trajectory(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .iterations
            .first()
            .map(|r| r.map_before)
            .into_iter()
            .collect();
        out.extend(self.iterations.iter().map(|r| r.map_after));
        out
    }
}

/// Surviving captions of a corpus between iterations.
#[derive(Debug, Clone)]
pub struct DebiasState<'a> {
    records: &'a [CaptionPairRecord],
    pos_tokens: Vec<Vec<String>>,
    neg_tokens: Vec<Vec<String>>,
    alive_pos: Vec<bool>,
    alive_neg: Vec<bool>,
}

impl<'a> DebiasState<'a> {
    pub fn new(records: &'a [CaptionPairRecord]) -> Self {
        DebiasState {
            records,
            pos_tokens: records.iter().map(|r| tokenize(&r.positive)).collect(),
            neg_tokens: records.iter().map(|r| tokenize(&r.negative)).collect(),
            alive_pos: vec![true; records.len()],
            alive_neg: vec![true; records.len()],
        }
    }

    fn tokens(&self, side: Side) -> &[Vec<String>] {
        match side {
            Side::Positive => &self.pos_tokens,
            Side::Negative => &self.neg_tokens,
        }
    }

    fn alive(&self, side: Side) -> &[bool] {
        match side {
            Side::Positive => &self.alive_pos,
            Side::Negative => &self.alive_neg,
        }
    }

    fn alive_mut(&mut self, side: Side) -> &mut Vec<bool> {
        match side {
            Side::Positive => &mut self.alive_pos,
            Side::Negative => &mut self.alive_neg,
        }
    }

    pub fn remaining(&self, side: Side) -> usize {
        self.alive(side).iter().filter(|a| **a).count()
    }

    pub fn is_alive(&self, side: Side, index: usize) -> bool {
        self.alive(side)[index]
    }

    pub fn stats(&self) -> VocabStats {
        let mut stats = VocabStats::default();
        for side in [Side::Positive, Side::Negative] {
            for (toks, _) in self
                .tokens(side)
                .iter()
                .zip(self.alive(side))
                .filter(|(_, a)| **a)
            {
                stats.add_tokens(side, toks);
            }
        }
        stats
    }

    /// Records whose positive and negative captions both survived, in input
    /// order.
    pub fn reconstruct(&self) -> Vec<CaptionPairRecord> {
        self.surviving_indices()
            .into_iter()
            .map(|i| self.records[i].clone())
            .collect()
    }

    pub fn surviving_indices(&self) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| self.alive_pos[i] && self.alive_neg[i])
            .collect()
    }
}

fn map_or_zero(stats: &VocabStats) -> f64 {
    map_score(stats).unwrap_or(0.0)
}

fn to_bias_words(penalties: &BTreeMap<String, f64>) -> Vec<BiasWord> {
    let mut v: Vec<(String, f64)> = penalties.iter().map(|(w, p)| (w.clone(), *p)).collect();
    v.sort_by(by_value_then_word);
    v.into_iter()
        .map(|(word, penalty)| BiasWord { word, penalty })
        .collect()
}

/// One filtering round: penalties from the current corpus, then removal of
/// the top scoring captions on each side.
pub fn debias_iterate(
    state: &mut DebiasState<'_>,
    config: &FilterConfig,
    iteration: usize,
) -> IterationRecord {
    let stats = state.stats();
    let map_before = map_or_zero(&stats);
    let total = state.records.len();

    let mut removed: [Vec<String>; 2] = Default::default();
    let mut words: [Vec<BiasWord>; 2] = Default::default();
    for (slot, side) in [Side::Positive, Side::Negative].into_iter().enumerate() {
        let penalties =
            penalty_map(&relative_ratio(&stats, side), config.top_n).unwrap_or_default();
        let mut scored: Vec<(usize, f64)> = state
            .alive(side)
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .map(|(i, _)| (i, score_tokens(&state.tokens(side)[i], &penalties)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| state.records[a.0].id.cmp(&state.records[b.0].id))
                .then_with(|| a.0.cmp(&b.0))
        });
        let k = config.removal_count(scored.len(), total);
        for &(i, _) in &scored[..k] {
            state.alive_mut(side)[i] = false;
            removed[slot].push(state.records[i].id.clone());
        }
        words[slot] = to_bias_words(&penalties);
    }

    let map_after = map_or_zero(&state.stats());
    let [removed_pos_ids, removed_neg_ids] = removed;
    let [top_bias_words_pos, top_bias_words_neg] = words;
    IterationRecord {
        iteration,
        removed_pos_ids,
        removed_neg_ids,
        top_bias_words_pos,
        top_bias_words_neg,
        map_before,
        map_after,
        remaining_pos: state.remaining(Side::Positive),
        remaining_neg: state.remaining(Side::Negative),
    }
}

/// Runs `n_iter` rounds and reconstructs the surviving pairs.
pub fn debias_run(
    dataset: &[CaptionPairRecord],
    config: &FilterConfig,
) -> Result<(Vec<CaptionPairRecord>, BiasReport), DebiasError> {
    let (kept, report) = debias_run_indices(dataset, config)?;
    Ok((
        kept.into_iter().map(|i| dataset[i].clone()).collect(),
        report,
    ))
}

/// Like [`debias_run`] but returns the input positions of the surviving
/// pairs.
pub fn debias_run_indices(
    dataset: &[CaptionPairRecord],
    config: &FilterConfig,
) -> Result<(Vec<usize>, BiasReport), DebiasError> {
    config.validate()?;
    let mut state = DebiasState::new(dataset);
    let iterations: Vec<IterationRecord> = (1..=config.n_iter)
        .map(|i| debias_iterate(&mut state, config, i))
        .collect();
    let kept = state.surviving_indices();
    let report = BiasReport {
        config: *config,
        input_pairs: dataset.len(),
        output_pairs: kept.len(),
        surviving_pos: state.remaining(Side::Positive),
        surviving_neg: state.remaining(Side::Negative),
        iterations,
    };
    Ok((kept, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, pos: &str, neg: &str) -> CaptionPairRecord {
        CaptionPairRecord {
            id: id.into(),
            video_id: "v".into(),
            start_s: 0.0,
            end_s: 1.0,
            positive: pos.into(),
            negative: neg.into(),
            hallucination_type: HallucinationType::AttributeModification,
        }
    }

    fn ratios(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
        items.iter().map(|(w, r)| (w.to_string(), *r)).collect()
    }

    #[test]
    fn frequencies() {
        let f = word_frequencies(["The dog runs.", "dog sits"]);
        assert_eq!(f.get("dog"), Some(&2));
        assert_eq!(f.get("the"), Some(&1));
        assert_eq!(f.len(), 4);
        assert!(word_frequencies(Vec::<String>::new()).is_empty());
        let f = word_frequencies(["man's hat"]);
        assert_eq!(f.keys().collect::<Vec<_>>(), vec!["hat", "mans"]);
    }

    #[test]
    fn ratios_by_side() {
        let mut s = VocabStats::default();
        s.f_neg.insert("x".into(), 10);
        s.f_neg.insert("y".into(), 5);
        s.f_pos.insert("y".into(), 5);
        s.f_pos.insert("z".into(), 3);
        let r = relative_ratio(&s, Side::Negative);
        assert_eq!(r["x"], 10.0);
        assert_eq!(r["y"], 1.0);
        assert_eq!(r["z"], 0.0);
        assert_eq!(relative_ratio(&s, Side::Positive)["z"], 3.0);
    }

    #[test]
    fn penalties() {
        let p = penalty_map(&ratios(&[("a", 10.0), ("b", 5.0)]), 2).unwrap();
        assert_eq!(p["a"], 1.0);
        assert_eq!(p["b"], 0.5);
        let p = penalty_map(&ratios(&[("a", 10.0), ("b", 5.0)]), 1).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p["a"], 1.0);
        assert_eq!(penalty_map(&ratios(&[("w", 3.0)]), 30).unwrap()["w"], 1.0);
        assert_eq!(
            penalty_map(&ratios(&[("w", 0.0)]), 3),
            Err(DebiasError::EmptyVocabulary)
        );
        // ties resolved lexicographically
        let p = penalty_map(&ratios(&[("b", 2.0), ("a", 2.0), ("c", 2.0)]), 2).unwrap();
        assert_eq!(p.keys().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn caption_scores_use_distinct_words() {
        let p = ratios(&[("a", 1.0), ("b", 0.5)]);
        assert_eq!(caption_bias_score("a b c", &p), 1.5);
        assert_eq!(caption_bias_score("c d", &p), 0.0);
        assert_eq!(caption_bias_score("a a A.", &p), 1.0);
    }

    #[test]
    fn log_odds_examples() {
        let mut s = VocabStats::default();
        s.f_pos.insert("w".into(), 9);
        s.f_pos.insert("filler".into(), 91);
        s.f_neg.insert("filler".into(), 100);
        for i in 0..98 {
            s.f_neg.insert(format!("n{i}"), 0);
        }
        assert_eq!(s.vocabulary().len(), 100);
        assert!((log_odds_score("w", &s) - 10f64.ln()).abs() < 1e-12);
        assert_eq!(log_odds_score("absent", &s), 0.0);
        assert_eq!(log_odds_score("w", &s), -log_odds_score("w", &s.swapped()));
    }

    #[test]
    fn map_examples() {
        let s = VocabStats::from_corpora(["a b"], ["a b"]);
        assert_eq!(map_score(&s).unwrap(), 0.0);
        assert_eq!(
            map_score(&VocabStats::default()),
            Err(DebiasError::EmptyVocabulary)
        );
        // one word per side: scores ln(2/3 / 1/3) and its negative
        let s = VocabStats::from_corpora(["x"], ["y"]);
        assert!((map_score(&s).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn removal_counts() {
        let c = FilterConfig::default();
        assert_eq!(c.removal_count(2000, 2000), 40);
        assert_eq!(c.removal_count(1960, 2000), 40);
        assert_eq!(c.removal_count(1921, 2000), 39);
        assert_eq!(c.removal_count(0, 2000), 0);
        let c = FilterConfig {
            pct_per_iter: 0.9,
            ..c
        };
        assert_eq!(c.removal_count(3, 3), 3);
        let o = FilterConfig {
            rate_base: RateBase::Original,
            pct_per_iter: 0.5,
            ..c
        };
        assert_eq!(o.removal_count(2, 10), 2);
    }

    #[test]
    fn planted_marker_goes_first() {
        let mut data: Vec<CaptionPairRecord> = (0..50)
            .map(|i| {
                pair(
                    &format!("r{i:02}"),
                    "a man walks a dog",
                    "a man walks a dog",
                )
            })
            .collect();
        data.push(pair("r99", "a man walks a dog", "a glorp walks a dog"));
        let mut state = DebiasState::new(&data);
        let cfg = FilterConfig {
            pct_per_iter: 0.01,
            ..FilterConfig::default()
        };
        let rec = debias_iterate(&mut state, &cfg, 1);
        assert_eq!(rec.removed_neg_ids, vec!["r99".to_string()]);
        assert!(rec.top_bias_words_neg.iter().any(|w| w.word == "glorp"));
    }

    #[test]
    fn mirrored_corpus_keeps_zero_map() {
        let data: Vec<CaptionPairRecord> = (0..20)
            .map(|i| {
                let c = format!("word{} shared caption", i % 4);
                pair(&format!("r{i:02}"), &c, &c)
            })
            .collect();
        let (_, report) = debias_run(&data, &FilterConfig::default()).unwrap();
        for it in &report.iterations {
            assert!((it.map_after - it.map_before).abs() < 1e-9);
            assert_eq!(it.removed_pos_ids, it.removed_neg_ids);
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let data = vec![pair("a", "x y", "x z"), pair("b", "p", "q")];
        let cfg = FilterConfig {
            n_iter: 0,
            ..FilterConfig::default()
        };
        let (out, report) = debias_run(&data, &cfg).unwrap();
        assert_eq!(out, data);
        assert!(report.iterations.is_empty());
    }

    #[test]
    fn reconstruct_needs_both_sides() {
        let data = vec![
            pair("a", "glorp x", "x"),
            pair("b", "x", "x y"),
            pair("c", "x", "x"),
        ];
        let cfg = FilterConfig {
            n_iter: 1,
            pct_per_iter: 0.3,
            ..FilterConfig::default()
        };
        let (out, report) = debias_run(&data, &cfg).unwrap();
        assert_eq!(report.iterations[0].removed_pos_ids, vec!["a"]);
        assert_eq!(report.iterations[0].removed_neg_ids, vec!["b"]);
        assert_eq!(
            out.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
            vec!["c"]
        );
    }

    #[test]
    fn record_validation() {
        let mut r = pair("a", "x", "y");
        r.start_s = 3.0;
        assert!(r.validate().is_err());
        let line = r#"{"id":"a","video_id":"v","start_s":0,"end_s":1,"positive":"x","negative":"y","hallucination_type":"detail_conflation"}"#;
        let rec = CaptionPairRecord::from_json_line(line).unwrap();
        assert_eq!(rec.hallucination_type, HallucinationType::DetailConflation);
        assert!(
            CaptionPairRecord::from_json_line(&line.replace("detail_conflation", "Other")).is_err()
        );
        assert!(CaptionPairRecord::from_json_line(&line.replace("\"x\"", "\" \"")).is_err());
    }
}
