//! Remote completion-endpoint client with on-disk response caching.
//!
//! Wire contract: a single POST endpoint accepting JSON bodies. Scoring
//! sends `{"prompt", "continuation", "logprobs": true}` and expects
//! `{"token_logprobs": [...]}` with the per-token log-probabilities of the
//! continuation (echo scoring). Generation sends `{"prompt", "max_tokens",
//! "temperature": 0.0, "seed"}` and expects `{"text": "..."}`. Endpoint
//! specifics live in [`OracleConfig`], never in code.
//!
//! Every response is recorded verbatim under
//! `<cache_dir>/<sha256-of-canonical-request>.json` as a
//! `{"request", "response"}` pair, so repeated requests are served from
//! disk without any network traffic and experiments replay exactly.

use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Gate, GenRequest, Oracle, OracleConfig, OracleError, ScoreRequest, ScoreResponse};

/// Carrier-level failure, retried up to the configured count.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
}

/// Minimal HTTP abstraction so tests can observe and fake the network.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, headers: &[(String, String)], body: &str)
        -> Result<String, TransportError>;
}

/// Production transport backed by a blocking HTTP agent.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    #[must_use]
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent }
    }
}

impl Transport for HttpTransport {
    fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
    ) -> Result<String, TransportError> {
        let mut request = self.agent.post(url).header("Content-Type", "application/json");
        for (name, value) in headers {
            request = request.header(name.as_str(), value.as_str());
        }
        let mut response = request.send(body).map_err(|e| TransportError {
            message: e.to_string(),
        })?;
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError {
                message: e.to_string(),
            })
    }
}

#[derive(Serialize)]
struct ScoreBody<'a> {
    prompt: &'a str,
    continuation: &'a str,
    logprobs: bool,
}

#[derive(Serialize)]
struct GenBody<'a> {
    prompt: &'a str,
    max_tokens: usize,
    temperature: f64,
    seed: i64,
}

pub struct RemoteOracle {
    endpoint: String,
    auth_token: Option<String>,
    retries: usize,
    cache_dir: PathBuf,
    transport: Box<dyn Transport>,
    gate: Gate,
}

impl RemoteOracle {
    /// Build against the real HTTP transport.
    pub fn new(config: &OracleConfig) -> Result<Self, OracleError> {
        let timeout = config.timeout;
        Self::with_transport(config, Box::new(HttpTransport::new(timeout)))
    }

    /// Build with an injected transport (used by tests to fake the network).
    pub fn with_transport(
        config: &OracleConfig,
        transport: Box<dyn Transport>,
    ) -> Result<Self, OracleError> {
        let endpoint = config.resolved_endpoint()?;
        let cache_dir = config.resolved_cache_dir();
        std::fs::create_dir_all(&cache_dir)?;
        let auth_token = std::env::var(&config.auth_token_env_var).ok();
        Ok(Self {
            endpoint,
            auth_token,
            retries: config.retries,
            cache_dir,
            transport,
            gate: Gate::new(config.max_parallel),
        })
    }

    fn headers(&self) -> Vec<(String, String)> {
        match &self.auth_token {
            Some(token) => vec![("Authorization".to_string(), format!("Bearer {token}"))],
            None => Vec::new(),
        }
    }

    fn cache_path(&self, canonical_request: &str) -> PathBuf {
        let digest = Sha256::digest(canonical_request.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.cache_dir.join(format!("{hex}.json"))
    }

    fn cache_lookup(&self, canonical_request: &str) -> Option<serde_json::Value> {
        let path = self.cache_path(canonical_request);
        let raw = std::fs::read_to_string(path).ok()?;
        let entry: serde_json::Value = serde_json::from_str(&raw).ok()?;
        entry.get("response").cloned()
    }

    fn cache_store(
        &self,
        canonical_request: &str,
        response: &serde_json::Value,
    ) -> Result<(), OracleError> {
        let request: serde_json::Value =
            serde_json::from_str(canonical_request).expect("canonical request is json");
        let entry = serde_json::json!({ "request": request, "response": response });
        let path = self.cache_path(canonical_request);
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(&entry)?.as_bytes())?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Cache-then-network: serve from disk when possible, otherwise POST
    /// under the parallelism gate with retries, then record the response.
    fn exchange(&self, canonical_request: &str) -> Result<serde_json::Value, OracleError> {
        if let Some(hit) = self.cache_lookup(canonical_request) {
            return Ok(hit);
        }
        let headers = self.headers();
        let mut last_error = String::new();
        let attempts = self.retries + 1;
        for _ in 0..attempts {
            let _permit = self.gate.acquire();
            match self
                .transport
                .post(&self.endpoint, &headers, canonical_request)
            {
                Ok(body) => {
                    let response: serde_json::Value = serde_json::from_str(&body)
                        .map_err(|e| OracleError::MalformedResponse(e.to_string()))?;
                    self.cache_store(canonical_request, &response)?;
                    return Ok(response);
                }
                Err(e) => last_error = e.message,
            }
        }
        Err(OracleError::RemoteUnavailable {
            attempts,
            message: last_error,
        })
    }
}

impl From<serde_json::Error> for OracleError {
    fn from(e: serde_json::Error) -> Self {
        OracleError::MalformedResponse(e.to_string())
    }
}

fn parse_score_response(value: &serde_json::Value) -> Result<ScoreResponse, OracleError> {
    let tokens = value
        .get("token_logprobs")
        .and_then(|v| v.as_array())
        .ok_or_else(|| OracleError::MalformedResponse("missing token_logprobs".to_string()))?;
    let mut logprobs = Vec::with_capacity(tokens.len());
    for t in tokens {
        let lp = t
            .as_f64()
            .ok_or_else(|| OracleError::MalformedResponse("non-numeric logprob".to_string()))?;
        if lp > 1e-6 {
            return Err(OracleError::MalformedResponse(format!(
                "positive log-probability {lp}"
            )));
        }
        // Tiny positive rounding noise from the endpoint clamps to zero.
        logprobs.push(lp.min(0.0));
    }
    Ok(ScoreResponse::from_token_logprobs(logprobs))
}

impl Oracle for RemoteOracle {
    fn score_continuation(&self, req: &ScoreRequest) -> Result<ScoreResponse, OracleError> {
        if req.continuation.is_empty() {
            return Err(OracleError::InvalidRequest("continuation must be non-empty"));
        }
        let body = serde_json::to_string(&ScoreBody {
            prompt: &req.prompt,
            continuation: &req.continuation,
            logprobs: true,
        })?;
        let response = self.exchange(&body)?;
        parse_score_response(&response)
    }

    fn generate(&self, req: &GenRequest) -> Result<String, OracleError> {
        if req.max_tokens == 0 {
            return Err(OracleError::InvalidRequest("max_tokens must be at least 1"));
        }
        let body = serde_json::to_string(&GenBody {
            prompt: &req.prompt,
            max_tokens: req.max_tokens,
            temperature: 0.0,
            seed: req.seed,
        })?;
        let response = self.exchange(&body)?;
        response
            .get("text")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| OracleError::MalformedResponse("missing text field".to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleKind;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct FakeTransport {
        calls: Arc<AtomicUsize>,
        in_flight: Arc<AtomicUsize>,
        peak: Arc<AtomicUsize>,
        fail_first: usize,
        reply: String,
    }

    impl FakeTransport {
        fn counting(reply: &str) -> (Self, Arc<AtomicUsize>) {
            let calls = Arc::new(AtomicUsize::new(0));
            (
                Self {
                    calls: Arc::clone(&calls),
                    in_flight: Arc::new(AtomicUsize::new(0)),
                    peak: Arc::new(AtomicUsize::new(0)),
                    fail_first: 0,
                    reply: reply.to_string(),
                },
                calls,
            )
        }
    }

    impl Transport for FakeTransport {
        fn post(
            &self,
            _url: &str,
            _headers: &[(String, String)],
            _body: &str,
        ) -> Result<String, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(2));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err(TransportError {
                    message: "synthetic outage".to_string(),
                });
            }
            Ok(self.reply.clone())
        }
    }

    fn config(cache_dir: &std::path::Path) -> OracleConfig {
        OracleConfig {
            kind: OracleKind::Remote,
            endpoint_url: Some("http://example.invalid/v1/complete".to_string()),
            cache_dir: Some(cache_dir.to_path_buf()),
            max_parallel: 2,
            retries: 2,
            ..OracleConfig::default()
        }
    }

    fn score_req(tag: &str) -> ScoreRequest {
        ScoreRequest {
            prompt: format!("Please answer the question. Question: {tag} Answer: "),
            continuation: "yes".to_string(),
        }
    }

    #[test]
    fn repeated_request_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, calls) = FakeTransport::counting(r#"{"token_logprobs":[-0.5,-0.5]}"#);
        let oracle = RemoteOracle::with_transport(&config(dir.path()), Box::new(transport)).unwrap();
        let a = oracle.score_continuation(&score_req("one")).unwrap();
        let b = oracle.score_continuation(&score_req("one")).unwrap();
        assert_eq!(a, b);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn cache_survives_oracle_reconstruction() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, _) = FakeTransport::counting(r#"{"token_logprobs":[-1.25]}"#);
        let first = RemoteOracle::with_transport(&config(dir.path()), Box::new(transport)).unwrap();
        let original = first.score_continuation(&score_req("persist")).unwrap();
        drop(first);

        // A fresh instance with an always-failing transport must still
        // answer from disk.
        let failing = FakeTransport {
            calls: Arc::new(AtomicUsize::new(0)),
            in_flight: Arc::new(AtomicUsize::new(0)),
            peak: Arc::new(AtomicUsize::new(0)),
            fail_first: usize::MAX,
            reply: String::new(),
        };
        let second = RemoteOracle::with_transport(&config(dir.path()), Box::new(failing)).unwrap();
        let replayed = second.score_continuation(&score_req("persist")).unwrap();
        assert_eq!(original, replayed);
    }

    #[test]
    fn retries_then_reports_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let transport = FakeTransport {
            calls: Arc::clone(&calls),
            in_flight: Arc::new(AtomicUsize::new(0)),
            peak: Arc::new(AtomicUsize::new(0)),
            fail_first: usize::MAX,
            reply: String::new(),
        };
        let oracle = RemoteOracle::with_transport(&config(dir.path()), Box::new(transport)).unwrap();
        match oracle.score_continuation(&score_req("down")) {
            Err(OracleError::RemoteUnavailable { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected RemoteUnavailable, got {other:?}"),
        }
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn transient_failures_recover_within_retry_budget() {
        let dir = tempfile::tempdir().unwrap();
        let transport = FakeTransport {
            calls: Arc::new(AtomicUsize::new(0)),
            in_flight: Arc::new(AtomicUsize::new(0)),
            peak: Arc::new(AtomicUsize::new(0)),
            fail_first: 2,
            reply: r#"{"token_logprobs":[-2.0]}"#.to_string(),
        };
        let oracle = RemoteOracle::with_transport(&config(dir.path()), Box::new(transport)).unwrap();
        let resp = oracle.score_continuation(&score_req("flaky")).unwrap();
        assert!((resp.total_logprob - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn malformed_responses_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, _) = FakeTransport::counting(r#"{"unexpected": true}"#);
        let oracle = RemoteOracle::with_transport(&config(dir.path()), Box::new(transport)).unwrap();
        assert!(matches!(
            oracle.score_continuation(&score_req("bad")),
            Err(OracleError::MalformedResponse(_))
        ));

        let dir2 = tempfile::tempdir().unwrap();
        let (transport, _) = FakeTransport::counting(r#"{"token_logprobs":[0.5]}"#);
        let oracle = RemoteOracle::with_transport(&config(dir2.path()), Box::new(transport)).unwrap();
        assert!(matches!(
            oracle.score_continuation(&score_req("positive")),
            Err(OracleError::MalformedResponse(_))
        ));
    }

    #[test]
    fn generation_parses_text_and_respects_cache() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, calls) = FakeTransport::counting(r#"{"text":"Winterfell"}"#);
        let oracle = RemoteOracle::with_transport(&config(dir.path()), Box::new(transport)).unwrap();
        let req = GenRequest {
            prompt: "Where do the Starks live?".to_string(),
            max_tokens: 8,
            seed: 3,
        };
        assert_eq!(oracle.generate(&req).unwrap(), "Winterfell");
        assert_eq!(oracle.generate(&req).unwrap(), "Winterfell");
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn parallelism_never_exceeds_configured_ceiling() {
        let dir = tempfile::tempdir().unwrap();
        let peak = Arc::new(AtomicUsize::new(0));
        let transport = FakeTransport {
            calls: Arc::new(AtomicUsize::new(0)),
            in_flight: Arc::new(AtomicUsize::new(0)),
            peak: Arc::clone(&peak),
            fail_first: 0,
            reply: r#"{"token_logprobs":[-1.0]}"#.to_string(),
        };
        let oracle = Arc::new(
            RemoteOracle::with_transport(&config(dir.path()), Box::new(transport)).unwrap(),
        );
        std::thread::scope(|scope| {
            for i in 0..12 {
                let oracle = Arc::clone(&oracle);
                scope.spawn(move || {
                    let _ = oracle.score_continuation(&score_req(&format!("q{i}")));
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2, "peak {}", peak.load(Ordering::SeqCst));
    }
}
