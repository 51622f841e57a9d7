use crate::format::{self, Evidence};
use crate::gateway::{ClipRef, Evaluator, JudgeRequest, Judgment};

use super::{
    accuracy_reward, attenuation_weights, total_reward, weighted_evidence_score, EvidenceScore,
    FailurePolicy, GroundTruth, RewardBreakdown, RewardError, RewardParts, RolloutRecord,
    ScoringConfig,
};

/// Scores one rollout end to end.
///
/// Format failures are not errors: they zero the format terms and accuracy
/// is still read from the answer block when one can be found. Evaluator or
/// verifier failures follow `config.failure_policy`: lenient drops the
/// affected term and adds a flag, strict returns the error.
pub async fn score_rollout(
    record: &RolloutRecord,
    evaluator: &dyn Evaluator,
    config: &ScoringConfig,
) -> Result<RewardBreakdown, RewardError> {
    let text = record.response.as_str();
    let mut flags = Vec::new();

    let r_think_fmt = format::think_format_reward(text);
    let r_evid_fmt = format::evidence_format_reward(text, config.allow_empty_evidence);

    let answer = match format::parse_blocks(text) {
        Ok(blocks) => Some(&text[blocks.answer.0..blocks.answer.1]),
        Err(_) => format::answer_region(text),
    };

    let r_acc = match answer {
        None => {
            flags.push("no_answer_block".to_owned());
            0.0
        }
        Some(answer) => {
            let verdict = match &record.ground_truth {
                GroundTruth::Oe { answer: reference } => {
                    match evaluator
                        .verify_answer(&record.question, reference, answer.trim())
                        .await
                    {
                        Ok(j) => Some(j),
                        Err(e) if config.failure_policy == FailurePolicy::Strict => {
                            return Err(e.into())
                        }
                        Err(e) => {
                            flags.push(format!("verifier_error: {e}"));
                            None
                        }
                    }
                }
                _ => None,
            };
            let needs_verdict = record.task == super::TaskKind::Oe;
            if needs_verdict && verdict.is_none() {
                0.0
            } else {
                match accuracy_reward(record.task, answer, &record.ground_truth, verdict.as_ref()) {
                    Ok(r) => r,
                    Err(RewardError::UnparseableAnswer(_)) => {
                        flags.push("unparseable_answer".to_owned());
                        0.0
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    };

    let evidence = format::lenient_evidence(text);
    let mut r_hallu = None;
    let mut per_evidence = Vec::new();
    if !evidence.is_empty() && config.gate.admits(record.task, r_acc) {
        match judge_evidence(record, &evidence, evaluator).await {
            Ok((value, scores, mut notes)) => {
                r_hallu = Some(value);
                per_evidence = scores;
                flags.append(&mut notes);
            }
            Err((scores, err)) => {
                if config.failure_policy == FailurePolicy::Strict {
                    return Err(err);
                }
                per_evidence = scores;
                flags.push(format!("evaluator_error: {err}"));
            }
        }
    }

    let mut breakdown = total_reward(
        RewardParts {
            task: record.task,
            r_acc,
            r_think_fmt,
            r_evid_fmt,
            r_hallu,
            per_evidence,
        },
        &config.weights,
        &config.gate,
    );
    breakdown.flags = flags;
    Ok(breakdown)
}

type Judged = (f64, Vec<EvidenceScore>, Vec<String>);

/// Sends one judge request per evidence that lies inside the video.
/// Evidence past the end of the video is not sent and scores 0.
async fn judge_evidence(
    record: &RolloutRecord,
    evidence: &[Evidence],
    evaluator: &dyn Evaluator,
) -> Result<Judged, (Vec<EvidenceScore>, RewardError)> {
    let weights = attenuation_weights(evidence);
    let mut requests = Vec::new();
    let mut slots = Vec::with_capacity(evidence.len());
    for e in evidence {
        match ClipRef::new(
            &record.video.path,
            e.start_s,
            e.end_s,
            Some(record.video.duration_s),
        ) {
            Ok(clip) => {
                slots.push(Some(requests.len()));
                requests.push(JudgeRequest::new(&clip, &e.desc));
            }
            Err(_) => slots.push(None),
        }
    }
    let results = evaluator.judge_batch(requests).await;

    let mut notes = Vec::new();
    let mut first_err = None;
    let mut ratios = Vec::with_capacity(evidence.len());
    let mut scores = Vec::with_capacity(evidence.len());
    for ((e, w), slot) in evidence.iter().zip(&weights).zip(&slots) {
        let judged: Option<Judgment> = match slot {
            None => {
                notes.push(format!(
                    "evidence_out_of_range: [{}, {}]",
                    e.start_s, e.end_s
                ));
                ratios.push(0.0);
                scores.push(EvidenceScore {
                    start_s: e.start_s,
                    end_s: e.end_s,
                    weight: *w,
                    p_yes: None,
                    p_no: None,
                    score: Some(0.0),
                });
                continue;
            }
            Some(i) => match &results[*i] {
                Ok(j) => Some(*j),
                Err(err) => {
                    first_err.get_or_insert_with(|| err.clone());
                    None
                }
            },
        };
        let ratio = judged.map(|j| j.positive_ratio());
        ratios.push(ratio.unwrap_or(0.0));
        scores.push(EvidenceScore {
            start_s: e.start_s,
            end_s: e.end_s,
            weight: *w,
            p_yes: judged.map(|j| j.p_yes),
            p_no: judged.map(|j| j.p_no),
            score: ratio.map(|r| w * r),
        });
    }
    if let Some(err) = first_err {
        return Err((scores, err.into()));
    }
    let value = weighted_evidence_score(&weights, &ratios).map_err(|e| (scores.clone(), e))?;
    Ok((value, scores, notes))
}
