//! The remote oracle client and its replayable response cache.
//!
//! Without a live endpoint this example injects a scripted transport to
//! show the caching behavior: the first request hits the wire, every
//! repeat is served from disk, and a fresh client over the same cache
//! directory replays responses without any network at all. Point
//! `METRAG_ORACLE_URL` at a real completion endpoint to exercise the HTTP
//! transport instead.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use metrag::oracle::{
    Oracle, OracleConfig, OracleKind, RemoteOracle, ScoreRequest, Transport, TransportError,
};

struct ScriptedTransport {
    calls: Arc<AtomicUsize>,
}

impl Transport for ScriptedTransport {
    fn post(
        &self,
        _url: &str,
        _headers: &[(String, String)],
        body: &str,
    ) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        // Score everything as two tokens of -0.7 each.
        println!("  wire: POST {body}");
        Ok(r#"{"token_logprobs": [-0.7, -0.7]}"#.to_string())
    }
}

fn main() {
    let cache_dir = std::env::temp_dir().join("metrag-remote-oracle-example");
    let _ = std::fs::remove_dir_all(&cache_dir);
    let config = OracleConfig {
        kind: OracleKind::Remote,
        endpoint_url: Some(
            std::env::var("METRAG_ORACLE_URL")
                .unwrap_or_else(|_| "http://example.invalid/v1/complete".to_string()),
        ),
        cache_dir: Some(cache_dir.clone()),
        ..OracleConfig::default()
    };

    let calls = Arc::new(AtomicUsize::new(0));
    let oracle = RemoteOracle::with_transport(
        &config,
        Box::new(ScriptedTransport { calls: Arc::clone(&calls) }),
    )
    .expect("client builds");

    let request = ScoreRequest {
        prompt: "Please answer the question. Question: Who holds Winterfell? Answer: "
            .to_string(),
        continuation: "the Starks".to_string(),
    };

    println!("first call (goes to the wire):");
    let first = oracle.score_continuation(&request).unwrap();
    println!("  total log-probability: {}", first.total_logprob);

    println!("second call (served from the cache):");
    let second = oracle.score_continuation(&request).unwrap();
    assert_eq!(first, second);
    println!("  identical response, {} wire call(s) total", calls.load(Ordering::SeqCst));

    // A new client over the same cache directory replays the experiment
    // even though its transport always fails.
    struct DeadTransport;
    impl Transport for DeadTransport {
        fn post(&self, _: &str, _: &[(String, String)], _: &str) -> Result<String, TransportError> {
            Err(TransportError { message: "offline".to_string() })
        }
    }
    let offline = RemoteOracle::with_transport(&config, Box::new(DeadTransport)).unwrap();
    let replayed = offline.score_continuation(&request).unwrap();
    assert_eq!(first, replayed);
    println!("offline replay from {} succeeded", cache_dir.display());
}
