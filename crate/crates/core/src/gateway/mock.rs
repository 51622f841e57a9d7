//! Deterministic stand-ins for the evaluator and verifier services.
//!
//! Judge rules:
//! * fixture: exact lookup on `(video_path, start_s, end_s, caption)`,
//!   `(0.5, 0.5)` when the key is not listed;
//! * hash: SHA-256 of the caption bytes; an even last digest byte gives
//!   `(0.8, 0.2)`, an odd one `(0.2, 0.8)`.
//!
//! Verify rules:
//! * fixture: exact lookup on `(question, reference, answer)`, `(0.5, 0.5)`
//!   by default;
//! * jaccard: token-set Jaccard `J` of reference and answer,
//!   `p_correct = clamp(J, 0.01, 0.99)`, `p_incorrect = clamp(1 - J, 0.01, 0.99)`.

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;
use tokio::sync::{oneshot, Semaphore};
use tokio::task::JoinHandle;

use super::{
    ClipRef, Evaluator, GatewayError, JudgeRequest, JudgeResponse, Judgment, VerifyRequest,
    VerifyResponse,
};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeFixture {
    pub video_path: String,
    pub start_s: f64,
    pub end_s: f64,
    pub caption: String,
    pub p_yes: f64,
    pub p_no: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyFixture {
    pub question: String,
    pub reference: String,
    pub answer: String,
    pub p_correct: f64,
    pub p_incorrect: f64,
}

/// Fixture document: `{"judge": [...], "verify": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureTable {
    #[serde(default)]
    pub judge: Vec<JudgeFixture>,
    #[serde(default)]
    pub verify: Vec<VerifyFixture>,
}

impl FixtureTable {
    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }
}

type JudgeKey = (String, u64, u64, String);
type VerifyKey = (String, String, String);

#[derive(Debug, Clone)]
enum JudgeRule {
    Table(HashMap<JudgeKey, JudgeResponse>),
    Hash,
}

#[derive(Debug, Clone)]
enum VerifyRule {
    Table(HashMap<VerifyKey, VerifyResponse>),
    Jaccard,
}

const DEFAULT_PAIR: (f64, f64) = (0.5, 0.5);

#[derive(Debug, Clone)]
pub struct MockRules {
    judge: JudgeRule,
    verify: VerifyRule,
}

impl MockRules {
    /// Table lookups for both routes.
    pub fn fixture(table: FixtureTable) -> Result<Self, String> {
        let mut judge = HashMap::new();
        for f in table.judge {
            Judgment::new(f.p_yes, f.p_no)?;
            let key = (
                f.video_path,
                f.start_s.to_bits(),
                f.end_s.to_bits(),
                f.caption,
            );
            judge.insert(
                key,
                JudgeResponse {
                    p_yes: f.p_yes,
                    p_no: f.p_no,
                },
            );
        }
        let mut verify = HashMap::new();
        for f in table.verify {
            Judgment::new(f.p_correct, f.p_incorrect)?;
            verify.insert(
                (f.question, f.reference, f.answer),
                VerifyResponse {
                    p_correct: f.p_correct,
                    p_incorrect: f.p_incorrect,
                },
            );
        }
        Ok(Self {
            judge: JudgeRule::Table(judge),
            verify: VerifyRule::Table(verify),
        })
    }

    /// Hash rule for judging, Jaccard rule for verifying.
    pub fn rules() -> Self {
        Self {
            judge: JudgeRule::Hash,
            verify: VerifyRule::Jaccard,
        }
    }

    pub fn judge(&self, req: &JudgeRequest) -> JudgeResponse {
        match &self.judge {
            JudgeRule::Table(table) => {
                let key = (
                    req.video_path.clone(),
                    req.start_s.to_bits(),
                    req.end_s.to_bits(),
                    req.caption.clone(),
                );
                table.get(&key).copied().unwrap_or(JudgeResponse {
                    p_yes: DEFAULT_PAIR.0,
                    p_no: DEFAULT_PAIR.1,
                })
            }
            JudgeRule::Hash => {
                let digest = Sha256::digest(req.caption.as_bytes());
                if digest[digest.len() - 1] % 2 == 0 {
                    JudgeResponse {
                        p_yes: 0.8,
                        p_no: 0.2,
                    }
                } else {
                    JudgeResponse {
                        p_yes: 0.2,
                        p_no: 0.8,
                    }
                }
            }
        }
    }

    pub fn verify(&self, req: &VerifyRequest) -> VerifyResponse {
        match &self.verify {
            VerifyRule::Table(table) => {
                let key = (
                    req.question.clone(),
                    req.reference.clone(),
                    req.answer.clone(),
                );
                table.get(&key).copied().unwrap_or(VerifyResponse {
                    p_correct: DEFAULT_PAIR.0,
                    p_incorrect: DEFAULT_PAIR.1,
                })
            }
            VerifyRule::Jaccard => {
                let j = jaccard(&req.reference, &req.answer);
                VerifyResponse {
                    p_correct: j.clamp(0.01, 0.99),
                    p_incorrect: (1.0 - j).clamp(0.01, 0.99),
                }
            }
        }
    }
}

/// Token-set Jaccard similarity; two empty texts count as identical.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<String> = tokenize(a).into_iter().collect();
    let sb: BTreeSet<String> = tokenize(b).into_iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// In-process evaluator answering from [`MockRules`] without any network.
#[derive(Debug, Clone)]
pub struct MockEvaluator {
    rules: Arc<MockRules>,
}

impl MockEvaluator {
    pub fn new(rules: MockRules) -> Self {
        Self {
            rules: Arc::new(rules),
        }
    }
}

#[async_trait]
impl Evaluator for MockEvaluator {
    async fn judge_caption(&self, clip: &ClipRef, caption: &str) -> Result<Judgment, GatewayError> {
        let r = self.rules.judge(&JudgeRequest::new(clip, caption));
        Ok(Judgment {
            p_yes: r.p_yes,
            p_no: r.p_no,
        })
    }

    async fn verify_answer(
        &self,
        question: &str,
        reference: &str,
        answer: &str,
    ) -> Result<Judgment, GatewayError> {
        let r = self.rules.verify(&VerifyRequest {
            question: question.to_owned(),
            reference: reference.to_owned(),
            answer: answer.to_owned(),
        });
        Ok(Judgment {
            p_yes: r.p_correct,
            p_no: r.p_incorrect,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Requests beyond this many in flight get 503.
    pub max_in_flight: Option<usize>,
    /// Artificial latency added to every request.
    pub delay: Duration,
}

/// Request counters of a running mock server.
#[derive(Debug, Default)]
pub struct ServerStats {
    pub judge: AtomicUsize,
    pub verify: AtomicUsize,
}

struct ServerState {
    rules: MockRules,
    options: ServerOptions,
    limiter: Option<Semaphore>,
    stats: Arc<ServerStats>,
}

/// Router serving `POST /judge` and `POST /verify`.
pub fn router(rules: MockRules, options: ServerOptions) -> (Router, Arc<ServerStats>) {
    let stats = Arc::new(ServerStats::default());
    let state = Arc::new(ServerState {
        rules,
        limiter: options.max_in_flight.map(Semaphore::new),
        options,
        stats: Arc::clone(&stats),
    });
    let router = Router::new()
        .route("/judge", post(judge_handler))
        .route("/verify", post(verify_handler))
        .with_state(state);
    (router, stats)
}

fn bad_request(msg: String) -> Response {
    (StatusCode::BAD_REQUEST, msg).into_response()
}

async fn with_limits<F>(state: &ServerState, f: F) -> Response
where
    F: FnOnce() -> Response,
{
    let _permit = match &state.limiter {
        Some(sem) => match sem.try_acquire() {
            Ok(p) => Some(p),
            Err(_) => return (StatusCode::SERVICE_UNAVAILABLE, "overloaded").into_response(),
        },
        None => None,
    };
    if !state.options.delay.is_zero() {
        tokio::time::sleep(state.options.delay).await;
    }
    f()
}

async fn judge_handler(State(state): State<Arc<ServerState>>, body: Bytes) -> Response {
    state.stats.judge.fetch_add(1, Ordering::Relaxed);
    let req: JudgeRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(e.to_string()),
    };
    if ClipRef::new(&req.video_path, req.start_s, req.end_s, None).is_err() {
        return bad_request("invalid clip bounds".to_owned());
    }
    with_limits(&state, || Json(state.rules.judge(&req)).into_response()).await
}

async fn verify_handler(State(state): State<Arc<ServerState>>, body: Bytes) -> Response {
    state.stats.verify.fetch_add(1, Ordering::Relaxed);
    let req: VerifyRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(e.to_string()),
    };
    with_limits(&state, || Json(state.rules.verify(&req)).into_response()).await
}

/// A mock server running on a background task.
pub struct MockServer {
    pub addr: SocketAddr,
    pub stats: Arc<ServerStats>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl MockServer {
    pub async fn spawn(
        addr: SocketAddr,
        rules: MockRules,
        options: ServerOptions,
    ) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let (router, stats) = router(rules, options);
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, router)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self {
            addr,
            stats,
            shutdown: Some(tx),
            task: Some(task),
        })
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(task) = &self.task {
            task.abort();
        }
    }
}

/// Serves until the process is stopped.
pub async fn serve(
    listener: TcpListener,
    rules: MockRules,
    options: ServerOptions,
) -> std::io::Result<()> {
    let (router, _) = router(rules, options);
    axum::serve(listener, router).await
}
