//! The pluggable LLM interface.
//!
//! Everything in the engine that needs a language model - utility
//! supervision, teacher summaries, answer generation - goes through the
//! [`Oracle`] trait. Two implementations ship: [`MockOracle`], a documented
//! pure function used by every offline test, and [`RemoteOracle`], a client
//! for any completion endpoint that can echo-score a continuation with
//! per-token log-probabilities. Remote responses are cached on disk keyed
//! by the SHA-256 of the canonical request, so runs are replayable.

mod mock;
mod remote;

pub use mock::MockOracle;
pub use remote::{HttpTransport, RemoteOracle, Transport, TransportError};

use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Env var naming the remote completion endpoint.
pub const ENV_ORACLE_URL: &str = "METRAG_ORACLE_URL";
/// Env var holding the bearer token for the remote endpoint.
pub const ENV_ORACLE_TOKEN: &str = "METRAG_ORACLE_TOKEN";
/// Env var overriding the response cache directory.
pub const ENV_CACHE_DIR: &str = "METRAG_CACHE_DIR";

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("remote oracle unavailable after {attempts} attempts: {message}")]
    RemoteUnavailable { attempts: usize, message: String },
    #[error("malformed oracle response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
    #[error("oracle cache io error: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("oracle config error: {0}")]
    Config(String),
}

/// Request to score a continuation given a prompt (echo scoring).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
    pub continuation: String,
}

/// Per-token log-probabilities of the continuation and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub token_logprobs: Vec<f64>,
    pub total_logprob: f64,
}

impl ScoreResponse {
    /// Build from per-token values; the total is their sum.
    #[must_use]
    pub fn from_token_logprobs(token_logprobs: Vec<f64>) -> Self {
        let total_logprob = token_logprobs.iter().sum();
        Self {
            token_logprobs,
            total_logprob,
        }
    }

    /// Length-invariant per-token mean, used by the utility trainer.
    #[must_use]
    pub fn mean_token_logprob(&self) -> f64 {
        if self.token_logprobs.is_empty() {
            return self.total_logprob;
        }
        self.total_logprob / self.token_logprobs.len() as f64
    }
}

/// Free-form generation request. Remote generation asks for greedy
/// decoding (temperature 0); the mock ignores the seed entirely.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub seed: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub endpoint_url: Option<String>,
    pub auth_token_env_var: String,
    pub timeout: Duration,
    pub max_parallel: usize,
    pub retries: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Mock,
            endpoint_url: None,
            auth_token_env_var: ENV_ORACLE_TOKEN.to_string(),
            timeout: Duration::from_secs(30),
            max_parallel: 4,
            retries: 2,
            cache_dir: None,
        }
    }
}

impl OracleConfig {
    /// Resolve the endpoint, falling back to `METRAG_ORACLE_URL`.
    pub fn resolved_endpoint(&self) -> Result<String, OracleError> {
        if let Some(url) = &self.endpoint_url {
            return Ok(url.clone());
        }
        std::env::var(ENV_ORACLE_URL)
            .map_err(|_| OracleError::Config("remote oracle requires an endpoint_url".to_string()))
    }

    /// Resolve the cache directory, falling back to `METRAG_CACHE_DIR` and
    /// then a per-user temp directory.
    #[must_use]
    pub fn resolved_cache_dir(&self) -> PathBuf {
        if let Some(dir) = &self.cache_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(ENV_CACHE_DIR) {
            return PathBuf::from(dir);
        }
        std::env::temp_dir().join("metrag-oracle-cache")
    }
}

/// Answer scoring and generation behind one handle. Implementations must be
/// safe to share across threads.
pub trait Oracle: Send + Sync {
    /// Log-probability of `continuation` given `prompt`.
    fn score_continuation(&self, req: &ScoreRequest) -> Result<ScoreResponse, OracleError>;

    /// Free-form completion of `prompt`.
    fn generate(&self, req: &GenRequest) -> Result<String, OracleError>;
}

/// Counting semaphore bounding in-flight remote requests.
pub(crate) struct Gate {
    available: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    pub(crate) fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> GateGuard<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.cv.wait(available).unwrap();
        }
        *available -= 1;
        GateGuard { gate: self }
    }
}

pub(crate) struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut available = self.gate.available.lock().unwrap();
        *available += 1;
        self.gate.cv.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_response_total_is_sum_of_tokens() {
        let r = ScoreResponse::from_token_logprobs(vec![-0.5, -0.25, -0.25]);
        assert!((r.total_logprob - (-1.0)).abs() < 1e-9);
        assert!((r.mean_token_logprob() - (-1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn gate_blocks_beyond_capacity() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;

        let gate = Arc::new(Gate::new(2));
        let current = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        std::thread::scope(|scope| {
            for _ in 0..8 {
                let gate = Arc::clone(&gate);
                let current = Arc::clone(&current);
                let peak = Arc::clone(&peak);
                scope.spawn(move || {
                    let _guard = gate.acquire();
                    let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    current.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
