use std::sync::atomic::{AtomicUsize, Ordering};

use super::GatewayError;

/// Replicas of one service, dispatched round-robin.
#[derive(Debug)]
pub struct EndpointPool {
    endpoints: Vec<String>,
    cursor: AtomicUsize,
}

impl EndpointPool {
    pub fn new(endpoints: Vec<String>) -> Result<Self, GatewayError> {
        if endpoints.is_empty() {
            return Err(GatewayError::NoEndpoints);
        }
        Ok(Self {
            endpoints: endpoints.into_iter().map(|e| normalize(&e)).collect(),
            cursor: AtomicUsize::new(0),
        })
    }

    pub fn endpoints(&self) -> &[String] {
        &self.endpoints
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    /// Reserves `n` consecutive cursor slots and returns the endpoint index
    /// for each: request `k` goes to `(cursor + k) mod len`.
    pub fn assign(&self, n: usize) -> Vec<usize> {
        let base = self.cursor.fetch_add(n, Ordering::Relaxed);
        (0..n)
            .map(|k| base.wrapping_add(k) % self.endpoints.len())
            .collect()
    }

    pub fn next(&self) -> usize {
        self.assign(1)[0]
    }
}

/// Adds an `http://` scheme to bare `host:port` addresses and trims any
/// trailing slash.
fn normalize(endpoint: &str) -> String {
    let trimmed = endpoint.trim().trim_end_matches('/');
    if trimmed.contains("://") {
        trimmed.to_owned()
    } else {
        format!("http://{trimmed}")
    }
}
