use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::sync::Semaphore;

use super::{
    ClipRef, EndpointPool, Evaluator, GatewayError, JudgeRequest, JudgeResponse, Judgment,
    VerifyRequest, VerifyResponse,
};

#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// Per-attempt timeout.
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    /// Backoff before retry `k` is `backoff_base * 2^k`.
    pub backoff_base: Duration,
    /// Cap on requests in flight across all batches.
    pub max_in_flight: usize,
    /// Try the remaining replicas when the assigned one is unreachable.
    pub failover: bool,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff_base: Duration::from_millis(100),
            max_in_flight: 32,
            failover: false,
        }
    }
}

enum Failure {
    Retryable(GatewayError),
    Fatal(GatewayError),
}

trait WireResponse: DeserializeOwned {
    fn into_judgment(self) -> Result<Judgment, String>;
}

impl WireResponse for JudgeResponse {
    fn into_judgment(self) -> Result<Judgment, String> {
        Judgment::new(self.p_yes, self.p_no)
    }
}

impl WireResponse for VerifyResponse {
    fn into_judgment(self) -> Result<Judgment, String> {
        Judgment::new(self.p_correct, self.p_incorrect)
    }
}

/// HTTP client for the evaluator and verifier replica pools.
pub struct HttpEvaluator {
    evaluator: Option<EndpointPool>,
    verifier: Option<EndpointPool>,
    http: reqwest::Client,
    config: ClientConfig,
    in_flight: Arc<Semaphore>,
}

impl HttpEvaluator {
    pub fn new(
        evaluator: Vec<String>,
        verifier: Vec<String>,
        config: ClientConfig,
    ) -> Result<Self, GatewayError> {
        let evaluator = (!evaluator.is_empty())
            .then(|| EndpointPool::new(evaluator))
            .transpose()?;
        let verifier = (!verifier.is_empty())
            .then(|| EndpointPool::new(verifier))
            .transpose()?;
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::BadResponse {
                endpoint: String::new(),
                reason: e.to_string(),
            })?;
        let in_flight = Arc::new(Semaphore::new(config.max_in_flight.max(1)));
        Ok(Self {
            evaluator,
            verifier,
            http,
            config,
            in_flight,
        })
    }

    pub fn evaluator_pool(&self) -> Option<&EndpointPool> {
        self.evaluator.as_ref()
    }

    pub fn verifier_pool(&self) -> Option<&EndpointPool> {
        self.verifier.as_ref()
    }

    /// Sends judge requests round-robin over the evaluator pool. Errors are
    /// reported per position; one failing replica does not fail the batch.
    pub async fn dispatch_judge(
        &self,
        requests: &[JudgeRequest],
    ) -> Vec<Result<Judgment, GatewayError>> {
        self.dispatch::<_, JudgeResponse>(self.evaluator.as_ref(), "/judge", requests)
            .await
    }

    pub async fn dispatch_verify(
        &self,
        requests: &[VerifyRequest],
    ) -> Vec<Result<Judgment, GatewayError>> {
        self.dispatch::<_, VerifyResponse>(self.verifier.as_ref(), "/verify", requests)
            .await
    }

    async fn dispatch<B, R>(
        &self,
        pool: Option<&EndpointPool>,
        route: &str,
        bodies: &[B],
    ) -> Vec<Result<Judgment, GatewayError>>
    where
        B: Serialize + Sync,
        R: WireResponse,
    {
        let Some(pool) = pool else {
            return bodies
                .iter()
                .map(|_| Err(GatewayError::NoEndpoints))
                .collect();
        };
        let slots = pool.assign(bodies.len());
        let futs = bodies.iter().zip(slots).map(|(body, slot)| async move {
            let _permit = self.in_flight.acquire().await.ok();
            self.send_with_failover::<B, R>(pool, slot, route, body)
                .await
        });
        futures::future::join_all(futs).await
    }

    async fn send_with_failover<B: Serialize, R: WireResponse>(
        &self,
        pool: &EndpointPool,
        slot: usize,
        route: &str,
        body: &B,
    ) -> Result<Judgment, GatewayError> {
        let attempts = if self.config.failover { pool.len() } else { 1 };
        let mut last = GatewayError::AllEndpointsDown;
        for k in 0..attempts {
            let endpoint = &pool.endpoints()[(slot + k) % pool.len()];
            match self.send_with_retries::<B, R>(endpoint, route, body).await {
                Err(err @ GatewayError::EndpointDown { .. }) => last = err,
                other => return other,
            }
        }
        if attempts == pool.len() {
            return Err(GatewayError::AllEndpointsDown);
        }
        Err(last)
    }

    async fn send_with_retries<B: Serialize, R: WireResponse>(
        &self,
        endpoint: &str,
        route: &str,
        body: &B,
    ) -> Result<Judgment, GatewayError> {
        let mut attempt = 0;
        loop {
            match self.send_once::<B, R>(endpoint, route, body).await {
                Ok(j) => return Ok(j),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) => {
                    if attempt >= self.config.retries {
                        return Err(e);
                    }
                    let delay = self.config.backoff_base * 2u32.saturating_pow(attempt);
                    tracing::debug!(%endpoint, attempt, error = %e, "retrying");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
            }
        }
    }

    async fn send_once<B: Serialize, R: WireResponse>(
        &self,
        endpoint: &str,
        route: &str,
        body: &B,
    ) -> Result<Judgment, Failure> {
        let url = format!("{endpoint}{route}");
        let response = self.http.post(&url).json(body).send().await.map_err(|e| {
            let endpoint = endpoint.to_owned();
            if e.is_timeout() {
                Failure::Retryable(GatewayError::Timeout { endpoint })
            } else {
                Failure::Retryable(GatewayError::EndpointDown { endpoint })
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            let err = GatewayError::Status {
                endpoint: endpoint.to_owned(),
                status: status.as_u16(),
            };
            return Err(if status.is_server_error() {
                Failure::Retryable(err)
            } else {
                Failure::Fatal(err)
            });
        }
        let bytes = response.bytes().await.map_err(|e| {
            let endpoint = endpoint.to_owned();
            if e.is_timeout() {
                Failure::Retryable(GatewayError::Timeout { endpoint })
            } else {
                Failure::Retryable(GatewayError::EndpointDown { endpoint })
            }
        })?;
        let bad = |reason: String| {
            Failure::Fatal(GatewayError::BadResponse {
                endpoint: endpoint.to_owned(),
                reason,
            })
        };
        let parsed: R = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
        parsed.into_judgment().map_err(bad)
    }
}

#[async_trait]
impl Evaluator for HttpEvaluator {
    async fn judge_caption(&self, clip: &ClipRef, caption: &str) -> Result<Judgment, GatewayError> {
        let req = [JudgeRequest::new(clip, caption)];
        self.dispatch_judge(&req).await.remove(0)
    }

    async fn verify_answer(
        &self,
        question: &str,
        reference: &str,
        answer: &str,
    ) -> Result<Judgment, GatewayError> {
        let req = [VerifyRequest {
            question: question.to_owned(),
            reference: reference.to_owned(),
            answer: answer.to_owned(),
        }];
        self.dispatch_verify(&req).await.remove(0)
    }

    async fn judge_batch(
        &self,
        requests: Vec<JudgeRequest>,
    ) -> Vec<Result<Judgment, GatewayError>> {
        self.dispatch_judge(&requests).await
    }
}
