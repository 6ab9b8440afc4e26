//! Declarative run configuration.
//!
//! One TOML file describes a whole run: corpus and dataset paths, the
//! oracle, encoder dimensions, utility training hyperparameters, fusion
//! cuts, summarization, and the output directory. `${VAR}` references in
//! the file expand from the environment before parsing, so secrets stay
//! out of committed configs. Input paths resolve relative to the config
//! file's directory; `output_dir` resolves relative to the working
//! directory. Command-line flags override file values.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::evalgen::KnowledgeKind;
use crate::fusion::{FusionConfig, FusionError};
use crate::oracle::{OracleConfig, OracleKind};
use crate::utility::UtilityTrainConfig;

use super::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub dataset: PathBuf,
    /// Where artifacts land. Excluded from the config fingerprint: it has
    /// no effect on any computed result.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: i64,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub utility: UtilitySection,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub summarize: SummarizeSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub kind: String,
    pub endpoint_url: Option<String>,
    pub auth_token_env: String,
    pub timeout_secs: u64,
    pub max_parallel: usize,
    pub retries: usize,
    pub cache_dir: Option<PathBuf>,
    /// Optional question-to-answer table (record-per-line JSON with fields
    /// `{"question","answer"}`) the mock oracle can answer without context.
    pub parametric: Option<PathBuf>,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            kind: "mock".to_string(),
            endpoint_url: None,
            auth_token_env: crate::oracle::ENV_ORACLE_TOKEN.to_string(),
            timeout_secs: 30,
            max_parallel: 4,
            retries: 2,
            cache_dir: None,
            parametric: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub feature_dim: usize,
    pub embed_dim: usize,
    /// `identity` (requires equal dims) or `random` (seeded by `seed`).
    pub init: String,
    /// Trained utility parameters to load for scoring and evaluation.
    pub checkpoint: Option<PathBuf>,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            feature_dim: 4096,
            embed_dim: 64,
            init: "random".to_string(),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilitySection {
    pub temperature: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub window_size: usize,
    pub include_empty_string: bool,
}

impl Default for UtilitySection {
    fn default() -> Self {
        let base = UtilityTrainConfig::default();
        Self {
            temperature: base.temperature,
            learning_rate: base.learning_rate,
            epochs: base.epochs,
            batch_size: base.batch_size,
            window_size: base.window_size,
            include_empty_string: base.include_empty_string,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub top_k: usize,
    pub k_sim: Option<usize>,
    pub k_util: Option<usize>,
}

impl Default for FusionSection {
    fn default() -> Self {
        Self {
            top_k: 5,
            k_sim: None,
            k_util: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeSection {
    pub enabled: bool,
    pub max_chars: usize,
}

impl Default for SummarizeSection {
    fn default() -> Self {
        Self {
            enabled: true,
            max_chars: 160,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Candidate pool depth for utility rescoring and fusion.
    pub retrieve_k: usize,
    /// `raw`, `summary`, or `none`.
    pub knowledge: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            retrieve_k: 10,
            knowledge: "summary".to_string(),
        }
    }
}

/// Expand `${VAR}` references from the environment.
fn interpolate_env(raw: &str) -> Result<String, CliError> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let tail = &rest[start + 2..];
        let end = tail.find('}').ok_or_else(|| {
            CliError::Input("unterminated ${...} in config file".to_string())
        })?;
        let name = &tail[..end];
        let value = std::env::var(name).map_err(|_| {
            CliError::Input(format!("config references unset environment variable {name}"))
        })?;
        out.push_str(&value);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let interpolated = interpolate_env(&raw)?;
        let mut config: RunConfig = toml::from_str(&interpolated)
            .map_err(|e| CliError::Input(format!("bad config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.corpus = resolve(base, &config.corpus);
        config.dataset = resolve(base, &config.dataset);
        if let Some(parametric) = &config.oracle.parametric {
            config.oracle.parametric = Some(resolve(base, parametric));
        }
        if let Some(checkpoint) = &config.encoder.checkpoint {
            config.encoder.checkpoint = Some(resolve(base, checkpoint));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.encoder.init == "identity" && self.encoder.feature_dim != self.encoder.embed_dim {
            return Err(CliError::Input(format!(
                "identity init requires equal dims, got {} and {}",
                self.encoder.feature_dim, self.encoder.embed_dim
            )));
        }
        if !matches!(self.encoder.init.as_str(), "identity" | "random") {
            return Err(CliError::Input(format!(
                "unknown encoder init {:?}",
                self.encoder.init
            )));
        }
        if !matches!(self.oracle.kind.as_str(), "mock" | "remote") {
            return Err(CliError::Input(format!(
                "unknown oracle kind {:?}",
                self.oracle.kind
            )));
        }
        self.knowledge_kind()?;
        self.fusion_config()?;
        Ok(())
    }

    /// Fingerprint of the effective configuration, embedded in artifacts.
    #[must_use]
    pub fn fingerprint(&self) -> String {
        crate::artifact::fingerprint_of(self)
    }

    pub fn knowledge_kind(&self) -> Result<KnowledgeKind, CliError> {
        match self.eval.knowledge.as_str() {
            "raw" => Ok(KnowledgeKind::RawDocs),
            "summary" => Ok(KnowledgeKind::Summary),
            "none" => Ok(KnowledgeKind::None),
            other => Err(CliError::Input(format!("unknown knowledge kind {other:?}"))),
        }
    }

    pub fn fusion_config(&self) -> Result<FusionConfig, CliError> {
        let result = match (self.fusion.k_sim, self.fusion.k_util) {
            (Some(k_sim), Some(k_util)) => FusionConfig::new(k_sim, k_util),
            (None, None) => FusionConfig::from_total(self.fusion.top_k),
            (k_sim, k_util) => FusionConfig::new(
                k_sim.unwrap_or(self.fusion.top_k / 2),
                k_util.unwrap_or(self.fusion.top_k / 2),
            ),
        };
        result.map_err(|e: FusionError| CliError::Input(e.to_string()))
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            kind: if self.oracle.kind == "remote" {
                OracleKind::Remote
            } else {
                OracleKind::Mock
            },
            endpoint_url: self.oracle.endpoint_url.clone(),
            auth_token_env_var: self.oracle.auth_token_env.clone(),
            timeout: Duration::from_secs(self.oracle.timeout_secs),
            max_parallel: self.oracle.max_parallel,
            retries: self.oracle.retries,
            cache_dir: self.oracle.cache_dir.clone(),
        }
    }

    pub fn utility_config(&self) -> UtilityTrainConfig {
        UtilityTrainConfig {
            temperature: self.utility.temperature,
            learning_rate: self.utility.learning_rate,
            epochs: self.utility.epochs,
            batch_size: self.utility.batch_size,
            window_size: self.utility.window_size,
            include_empty_string: self.utility.include_empty_string,
            seed: self.seed as u64,
        }
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_minimal_config_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "corpus = \"c.jsonl\"\ndataset = \"d.jsonl\"\n").unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.corpus, dir.path().join("c.jsonl"));
        assert_eq!(config.utility.temperature, 0.05);
        assert_eq!(config.fusion.top_k, 5);
        assert_eq!(config.eval.retrieve_k, 10);
    }

    #[test]
    fn interpolates_environment_variables() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "corpus = \"c.jsonl\"\ndataset = \"d.jsonl\"\n[oracle]\nkind = \"remote\"\nendpoint_url = \"${METRAG_TEST_URL}\"\n",
        )
        .unwrap();
        std::env::set_var("METRAG_TEST_URL", "http://example.invalid/v1");
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(
            config.oracle.endpoint_url.as_deref(),
            Some("http://example.invalid/v1")
        );
        std::env::remove_var("METRAG_TEST_URL");

        std::fs::write(
            &path,
            "corpus = \"c.jsonl\"\ndataset = \"d.jsonl\"\n[oracle]\nkind = \"remote\"\nendpoint_url = \"${METRAG_UNSET_VAR_XYZ}\"\n",
        )
        .unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn rejects_inconsistent_settings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "corpus = \"c\"\ndataset = \"d\"\n[encoder]\nfeature_dim = 8\nembed_dim = 4\ninit = \"identity\"\ncheckpoint = \"x\"\n",
        )
        .unwrap();
        assert!(matches!(RunConfig::load(&path), Err(CliError::Input(_))));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "corpus = \"c\"\ndataset = \"d\"\nseed = 1\n").unwrap();
        let a = RunConfig::load(&path).unwrap().fingerprint();
        std::fs::write(&path, "corpus = \"c\"\ndataset = \"d\"\nseed = 2\n").unwrap();
        let b = RunConfig::load(&path).unwrap().fingerprint();
        assert_ne!(a, b);
    }
}
