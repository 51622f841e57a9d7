//! Access to the external judgment services: the caption-vs-clip
//! evaluator (`POST /judge`) and the open-ended answer verifier
//! (`POST /verify`).
//!
//! [`HttpEvaluator`] talks to real replicas with round-robin dispatch.
//! [`MockEvaluator`] and [`mock::serve`] provide deterministic stand-ins
//! driven by [`MockRules`].

mod client;
pub mod mock;
mod pool;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{ClientConfig, HttpEvaluator};
pub use mock::{MockEvaluator, MockRules};
pub use pool::EndpointPool;

/// Environment variable listing evaluator replicas, comma separated.
pub const EVALUATOR_ENDPOINTS_ENV: &str = "PLR_EVALUATOR_ENDPOINTS";
/// Environment variable listing verifier replicas, comma separated.
pub const VERIFIER_ENDPOINTS_ENV: &str = "PLR_VERIFIER_ENDPOINTS";

/// Two non-negative scores for the positive and negative label.
///
/// For the evaluator these are `(p_yes, p_no)`; for the verifier they are
/// `(p_correct, p_incorrect)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub p_yes: f64,
    pub p_no: f64,
}

impl Judgment {
    pub fn new(p_yes: f64, p_no: f64) -> Result<Self, String> {
        if !p_yes.is_finite() || !p_no.is_finite() {
            return Err(format!("non-finite probabilities ({p_yes}, {p_no})"));
        }
        if p_yes < 0.0 || p_no < 0.0 {
            return Err(format!("negative probability ({p_yes}, {p_no})"));
        }
        if p_yes + p_no <= 0.0 {
            return Err("probabilities sum to zero".to_owned());
        }
        Ok(Self { p_yes, p_no })
    }

    /// `p_yes / (p_yes + p_no)`.
    pub fn positive_ratio(&self) -> f64 {
        self.p_yes / (self.p_yes + self.p_no)
    }
}

/// A clip of a video, cut on the service side.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRef {
    pub video_path: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl ClipRef {
    pub fn new(
        video_path: impl Into<String>,
        start_s: f64,
        end_s: f64,
        duration_s: Option<f64>,
    ) -> Result<Self, GatewayError> {
        let bad = !(start_s.is_finite() && end_s.is_finite())
            || start_s < 0.0
            || start_s > end_s
            || duration_s.is_some_and(|d| end_s > d);
        if bad {
            return Err(GatewayError::InvalidClip { start_s, end_s });
        }
        Ok(Self {
            video_path: video_path.into(),
            start_s,
            end_s,
        })
    }
}

/// Body of `POST /judge`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub video_path: String,
    pub start_s: f64,
    pub end_s: f64,
    pub caption: String,
}

impl JudgeRequest {
    pub fn new(clip: &ClipRef, caption: &str) -> Self {
        Self {
            video_path: clip.video_path.clone(),
            start_s: clip.start_s,
            end_s: clip.end_s,
            caption: caption.to_owned(),
        }
    }
}

/// Response of `POST /judge`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub p_yes: f64,
    pub p_no: f64,
}

/// Body of `POST /verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRequest {
    pub question: String,
    pub reference: String,
    pub answer: String,
}

/// Response of `POST /verify`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub p_correct: f64,
    pub p_incorrect: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("request to {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("bad response from {endpoint}: {reason}")]
    BadResponse { endpoint: String, reason: String },
    #[error("{endpoint} answered with status {status}")]
    Status { endpoint: String, status: u16 },
    #[error("endpoint {endpoint} is unreachable")]
    EndpointDown { endpoint: String },
    #[error("all endpoints are down")]
    AllEndpointsDown,
    #[error("no endpoints configured")]
    NoEndpoints,
    #[error("invalid clip [{start_s}, {end_s}]")]
    InvalidClip { start_s: f64, end_s: f64 },
}

/// Anything that can answer caption and answer judgments.
#[async_trait]
pub trait Evaluator: Send + Sync {
    async fn judge_caption(&self, clip: &ClipRef, caption: &str) -> Result<Judgment, GatewayError>;

    /// Returns `(p_correct, p_incorrect)` packed as a [`Judgment`].
    async fn verify_answer(
        &self,
        question: &str,
        reference: &str,
        answer: &str,
    ) -> Result<Judgment, GatewayError>;

    /// Judges several captions; results come back in request order.
    async fn judge_batch(
        &self,
        requests: Vec<JudgeRequest>,
    ) -> Vec<Result<Judgment, GatewayError>> {
        let futs = requests.iter().map(|r| async move {
            let clip = ClipRef {
                video_path: r.video_path.clone(),
                start_s: r.start_s,
                end_s: r.end_s,
            };
            self.judge_caption(&clip, &r.caption).await
        });
        futures::future::join_all(futs).await
    }
}

/// Splits a comma-separated endpoint list, dropping blanks.
pub fn parse_endpoint_list(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn judgment_validation() {
        assert!(Judgment::new(-1.0, 0.5).is_err());
        assert!(Judgment::new(0.0, 0.0).is_err());
        assert!(Judgment::new(f64::NAN, 1.0).is_err());
        assert_eq!(Judgment::new(0.9, 0.1).unwrap().positive_ratio(), 0.9);
    }

    #[test]
    fn clip_bounds() {
        assert!(ClipRef::new("v.mp4", 0.0, 5.0, Some(5.0)).is_ok());
        assert!(ClipRef::new("v.mp4", 0.0, 5.5, Some(5.0)).is_err());
        assert!(ClipRef::new("v.mp4", 3.0, 2.0, None).is_err());
    }

    #[test]
    fn endpoint_list() {
        assert_eq!(
            parse_endpoint_list(" a:1, ,b:2,"),
            vec!["a:1".to_owned(), "b:2".to_owned()]
        );
    }
}
