//! Command implementations behind the `metrag` binary.
//!
//! Each command is an ordinary library function over a [`RunConfig`], so
//! everything the binary can do is scriptable in-process as well. Exit
//! codes: 0 success, 2 input or configuration error, 3 oracle error,
//! 4 numeric divergence.

pub mod config;

pub use config::RunConfig;

use std::path::PathBuf;

use thiserror::Error;

use crate::artifact::{self, ArtifactMeta, TOOL_VERSION};
use crate::evalgen::{self, EvalOptions, EvalResult};
use crate::fusion::AdmitFlag;
use crate::oracle::{MockOracle, Oracle, OracleError, RemoteOracle};
use crate::pipeline::Pipeline;
use crate::retriever::{self, Index};
use crate::summarizer;
use crate::textcore::EncoderParams;
use crate::utility::{self, Query, UtilityError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("numeric divergence: {0}")]
    Diverged(String),
}

impl CliError {
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Oracle(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

impl From<retriever::RetrieverError> for CliError {
    fn from(e: retriever::RetrieverError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<evalgen::EvalError> for CliError {
    fn from(e: evalgen::EvalError) -> Self {
        match e {
            evalgen::EvalError::Oracle(inner) => CliError::Oracle(inner.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<UtilityError> for CliError {
    fn from(e: UtilityError) -> Self {
        match e {
            UtilityError::Oracle(inner) => CliError::Oracle(inner.to_string()),
            UtilityError::DivergedLoss { .. } => CliError::Diverged(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Oracle(e.to_string())
    }
}

impl From<crate::artifact::ArtifactError> for CliError {
    fn from(e: crate::artifact::ArtifactError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<crate::pipeline::PipelineError> for CliError {
    fn from(e: crate::pipeline::PipelineError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<summarizer::SummarizerError> for CliError {
    fn from(e: summarizer::SummarizerError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn index_path(config: &RunConfig) -> PathBuf {
    config.output_dir.join("index.bin")
}

fn utility_dir(config: &RunConfig) -> PathBuf {
    config.output_dir.join("utility")
}

/// The similarity encoder described by the config.
pub fn similarity_params(config: &RunConfig) -> EncoderParams {
    match config.encoder.init.as_str() {
        "identity" => EncoderParams::identity(config.encoder.feature_dim),
        _ => EncoderParams::random(
            config.encoder.feature_dim,
            config.encoder.embed_dim,
            config.seed as u64,
        ),
    }
}

/// Utility encoder resolution order: explicit checkpoint from the config,
/// then a previously trained checkpoint under the output directory, then
/// the untrained similarity parameters.
pub fn utility_params(config: &RunConfig, sim: &EncoderParams) -> Result<EncoderParams, CliError> {
    if let Some(path) = &config.encoder.checkpoint {
        return EncoderParams::load(path).map_err(|e| CliError::Input(e.to_string()));
    }
    let trained = utility_dir(config).join("params.bin");
    if trained.exists() {
        return EncoderParams::load(&trained).map_err(|e| CliError::Input(e.to_string()));
    }
    Ok(sim.clone())
}

fn load_corpus(config: &RunConfig) -> Result<Vec<retriever::Document>, CliError> {
    Ok(retriever::load_corpus(&config.corpus)?)
}

fn load_dataset(config: &RunConfig) -> Result<Vec<Query>, CliError> {
    Ok(evalgen::load_dataset(&config.dataset)?)
}

/// Build the oracle the config asks for. The mock is loaded with the
/// dataset's gold answers plus the optional parametric table.
pub fn build_oracle(config: &RunConfig, queries: &[Query]) -> Result<Box<dyn Oracle>, CliError> {
    if config.oracle.kind == "remote" {
        let remote = RemoteOracle::new(&config.oracle_config())?;
        return Ok(Box::new(remote));
    }
    let mut mock = MockOracle::new();
    for query in queries {
        mock.add_gold(&query.text, &query.gold_answers);
    }
    if let Some(path) = &config.oracle.parametric {
        #[derive(serde::Deserialize)]
        struct Row {
            question: String,
            answer: String,
        }
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        for (idx, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(line).map_err(|e| {
                CliError::Input(format!(
                    "bad parametric entry at {}:{}: {e}",
                    path.display(),
                    idx + 1
                ))
            })?;
            mock.add_parametric(&row.question, &row.answer);
        }
    }
    Ok(Box::new(mock))
}

fn build_pipeline(config: &RunConfig) -> Result<Pipeline, CliError> {
    let corpus = load_corpus(config)?;
    let sim = similarity_params(config);
    let util = utility_params(config, &sim)?;
    Ok(Pipeline::new(
        &corpus,
        &sim,
        &util,
        config.fusion_config()?,
        config.fusion.top_k,
        config.eval.retrieve_k,
    )?)
}

fn eval_options(config: &RunConfig) -> Result<EvalOptions, CliError> {
    let knowledge = if config.summarize.enabled {
        config.knowledge_kind()?
    } else {
        // --no-summary: raw documents stand in for the summary.
        match config.knowledge_kind()? {
            evalgen::KnowledgeKind::Summary => evalgen::KnowledgeKind::RawDocs,
            other => other,
        }
    };
    Ok(EvalOptions {
        knowledge,
        summarize_max_chars: config.summarize.max_chars,
        use_fusion: true,
        seed: config.seed,
        config_fingerprint: config.fingerprint(),
    })
}

/// Build the retrieval index and persist it with run provenance.
pub fn cmd_ingest(config: &RunConfig) -> Result<PathBuf, CliError> {
    let corpus = load_corpus(config)?;
    let params = similarity_params(config);
    let index = retriever::build_index(&corpus, &params)?;
    let meta = ArtifactMeta::new(config.seed, config.fingerprint());
    let path = index_path(config);
    artifact::write_index(&path, &index, &meta)?;
    println!(
        "indexed {} documents -> {} (params {})",
        index.len(),
        path.display(),
        index.params_fingerprint()
    );
    Ok(path)
}

fn load_index(config: &RunConfig) -> Result<Index, CliError> {
    let path = index_path(config);
    if path.exists() {
        let (index, _) = artifact::read_index(&path)?;
        Ok(index)
    } else {
        let corpus = load_corpus(config)?;
        Ok(retriever::build_index(&corpus, &similarity_params(config))?)
    }
}

/// Train the utility encoder and write the checkpoint, sidecar, and loss
/// trace. On oracle failure the untouched initial parameters are saved as
/// a partial checkpoint before the error propagates.
pub fn cmd_train_utility(config: &RunConfig) -> Result<PathBuf, CliError> {
    let queries = load_dataset(config)?;
    let index = load_index(config)?;
    let oracle = build_oracle(config, &queries)?;
    let train_config = config.utility_config();
    let dir = utility_dir(config);
    std::fs::create_dir_all(&dir)?;

    let outcome = match utility::train_utility(
        &train_config,
        &queries,
        &index,
        index.params(),
        oracle.as_ref(),
    ) {
        Ok(outcome) => outcome,
        Err(UtilityError::Oracle(e)) => {
            index.params().save(&dir.join("partial_params.bin"))
                .map_err(|io| CliError::Input(io.to_string()))?;
            std::fs::write(
                dir.join("partial.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "aborted": true,
                    "reason": e.to_string(),
                    "config_fingerprint": config.fingerprint(),
                    "tool_version": TOOL_VERSION,
                }))
                .unwrap(),
            )?;
            return Err(UtilityError::Oracle(e).into());
        }
        Err(other) => return Err(other.into()),
    };

    let params_path = dir.join("params.bin");
    outcome
        .params
        .save(&params_path)
        .map_err(|e| CliError::Input(e.to_string()))?;

    let meta = ArtifactMeta::new(config.seed, config.fingerprint());
    let (final_epoch, final_loss) = *outcome.loss_trace.last().expect("trace is non-empty");
    let oracle_id = if config.oracle.kind == "remote" {
        config
            .oracle
            .endpoint_url
            .clone()
            .unwrap_or_else(|| "remote".to_string())
    } else {
        "mock".to_string()
    };
    let sidecar = serde_json::json!({
        "config": train_config,
        "epoch": final_epoch,
        "mean_loss": final_loss,
        "seed": config.seed,
        "oracle_id": oracle_id,
        "config_fingerprint": meta.config_fingerprint,
        "tool_version": meta.tool_version,
        "params_fingerprint": outcome.params.fingerprint(),
    });
    std::fs::write(
        dir.join("checkpoint.json"),
        serde_json::to_string_pretty(&sidecar).unwrap(),
    )?;

    let mut csv = String::new();
    csv.push_str(&meta.csv_comment());
    csv.push('\n');
    csv.push_str("epoch,mean_loss\n");
    for (epoch, loss) in &outcome.loss_trace {
        csv.push_str(&format!("{epoch},{loss}\n"));
    }
    std::fs::write(dir.join("loss_trace.csv"), csv)?;

    println!(
        "trained utility encoder over {} queries: loss {} -> {} ({})",
        queries.len(),
        outcome.loss_trace.first().unwrap().1,
        final_loss,
        params_path.display()
    );
    Ok(params_path)
}

/// Top-k similarity retrieval for one query string.
pub fn cmd_retrieve(config: &RunConfig, query_text: &str, k: usize) -> Result<(), CliError> {
    let index = load_index(config)?;
    let hits = retriever::retrieve_topk(&index, query_text, k)?;
    for (rank, hit) in hits.iter().enumerate() {
        let title = index
            .document(&hit.doc_id)
            .map(|d| d.title.clone())
            .unwrap_or_default();
        println!("{:2}. {:<18} {:+.4}  {}", rank + 1, hit.doc_id, hit.score, title);
    }
    Ok(())
}

/// Show both rankings and the fused admitted set for one query.
pub fn cmd_fuse(config: &RunConfig, query_text: &str) -> Result<(), CliError> {
    let pipeline = build_pipeline(config)?;
    let stage = pipeline.admit(query_text)?;
    println!("similarity pool:");
    for hit in &stage.sim_scored {
        println!("  {:<18} {:+.4}", hit.doc_id, hit.score);
    }
    println!("utility scores (with sentinel):");
    for hit in &stage.util_scored {
        println!("  {:<18} {:+.4}", hit.doc_id, hit.score);
    }
    if stage.selective_fired {
        println!("selective retrieval fired: answering without documents");
        return Ok(());
    }
    println!("admitted:");
    let pool_ids: Vec<&str> = stage.sim_scored.iter().map(|s| s.doc_id.as_str()).collect();
    let util_only: Vec<_> = stage
        .util_scored
        .iter()
        .filter(|s| pool_ids.contains(&s.doc_id.as_str()))
        .cloned()
        .collect();
    let admitted = crate::fusion::fuse(&stage.sim_scored, &util_only, pipeline.fusion_config())
        .map_err(|e| CliError::Input(e.to_string()))?;
    for id in &admitted.doc_ids {
        let flag = match admitted.admit_flags[id] {
            AdmitFlag::BySimilarity => "similarity",
            AdmitFlag::ByUtility => "utility",
            AdmitFlag::Both => "both",
        };
        println!("  {id:<18} via {flag}");
    }
    Ok(())
}

/// Summarize the admitted documents for one query.
pub fn cmd_summarize(config: &RunConfig, query_text: &str) -> Result<(), CliError> {
    let pipeline = build_pipeline(config)?;
    let stage = pipeline.admit(query_text)?;
    if stage.selective_fired || stage.admitted.is_empty() {
        println!("no documents admitted; nothing to summarize");
        return Ok(());
    }
    let query = Query {
        id: "adhoc".to_string(),
        text: query_text.to_string(),
        gold_answers: vec![String::new()],
    };
    let summary = summarizer::extractive_summarize(&query, &stage.admitted, config.summarize.max_chars);
    let ratio = summarizer::compression_ratio(&summary, &stage.admitted)?;
    println!("{summary}");
    println!("-- {} admitted documents, ratio {:.4}", stage.admitted.len(), ratio);
    Ok(())
}

/// Answer one query with the full pipeline.
pub fn cmd_answer(config: &RunConfig, query_text: &str) -> Result<(), CliError> {
    let queries = load_dataset(config)?;
    let oracle = build_oracle(config, &queries)?;
    let pipeline = build_pipeline(config)?;
    let query = queries
        .iter()
        .find(|q| q.text == query_text)
        .cloned()
        .unwrap_or_else(|| Query {
            id: "adhoc".to_string(),
            text: query_text.to_string(),
            gold_answers: vec![String::new()],
        });
    let stage = pipeline.admit(&query.text)?;
    let opts = eval_options(config)?;
    let knowledge = if stage.selective_fired || stage.admitted.is_empty() {
        evalgen::Knowledge::none()
    } else {
        match opts.knowledge {
            evalgen::KnowledgeKind::Summary => evalgen::Knowledge::summary(
                summarizer::extractive_summarize(&query, &stage.admitted, opts.summarize_max_chars),
            ),
            evalgen::KnowledgeKind::RawDocs => evalgen::Knowledge::raw_docs(
                stage
                    .admitted
                    .iter()
                    .map(retriever::Document::display_text)
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            evalgen::KnowledgeKind::None => evalgen::Knowledge::none(),
        }
    };
    let answer = evalgen::answer(oracle.as_ref(), &query, &knowledge, config.seed)?;
    println!("{answer}");
    Ok(())
}

/// Build the distillation and alignment corpora.
pub fn cmd_build_corpora(config: &RunConfig) -> Result<(), CliError> {
    let queries = load_dataset(config)?;
    let oracle = build_oracle(config, &queries)?;
    let pipeline = build_pipeline(config)?;
    let dir = config.output_dir.join("corpora");
    std::fs::create_dir_all(&dir)?;

    let pairs = summarizer::build_distillation_corpus(&queries, &pipeline, oracle.as_ref(), config.seed)?;
    summarizer::save_distillation_corpus(&pairs, &dir.join("ci.jsonl"))?;
    let triples = summarizer::build_alignment_corpus(
        &queries,
        &pipeline,
        oracle.as_ref(),
        config.summarize.max_chars,
        config.seed,
    )?;
    summarizer::save_alignment_corpus(&triples, &dir.join("ca.jsonl"))?;

    let meta = ArtifactMeta::new(config.seed, config.fingerprint());
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "seed": meta.seed,
            "config_fingerprint": meta.config_fingerprint,
            "tool_version": meta.tool_version,
            "instruction_summary_pairs": pairs.len(),
            "alignment_triples": triples.len(),
        }))
        .unwrap(),
    )?;
    println!(
        "wrote {} instruction-summary pairs and {} alignment triples under {}",
        pairs.len(),
        triples.len(),
        dir.display()
    );
    Ok(())
}

/// Variant knobs for `cmd_eval`, mirroring the ablations.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalFlags {
    pub no_fusion: bool,
    pub no_summary: bool,
    pub knowledge: Option<evalgen::KnowledgeKind>,
}

/// Evaluate the dataset and write `report.csv` plus `aggregate.json`.
pub fn cmd_eval(config: &RunConfig, flags: &EvalFlags) -> Result<EvalResult, CliError> {
    let queries = load_dataset(config)?;
    let oracle = build_oracle(config, &queries)?;
    let pipeline = build_pipeline(config)?;
    let mut opts = eval_options(config)?;
    if let Some(kind) = flags.knowledge {
        opts.knowledge = kind;
    }
    if flags.no_summary && opts.knowledge == evalgen::KnowledgeKind::Summary {
        opts.knowledge = evalgen::KnowledgeKind::RawDocs;
    }
    opts.use_fusion = !flags.no_fusion;

    let result = evalgen::evaluate(&queries, &pipeline, oracle.as_ref(), &opts)?;
    std::fs::create_dir_all(&config.output_dir)?;
    let meta = ArtifactMeta::new(config.seed, config.fingerprint());

    let mut csv = String::new();
    csv.push_str(&meta.csv_comment());
    csv.push('\n');
    csv.push_str("query_id,em,f1,selective_retrieval_fired,n_docs_admitted,summary_ratio\n");
    for record in &result.records {
        let ratio = record
            .summary_ratio
            .map(|r| r.to_string())
            .unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            record.query_id,
            record.em,
            record.f1,
            record.selective_retrieval_fired,
            record.n_docs_admitted,
            ratio
        ));
    }
    std::fs::write(config.output_dir.join("report.csv"), csv)?;

    let aggregate = serde_json::json!({
        "em_mean": result.em_mean,
        "f1_mean": result.f1_mean,
        "n_queries": result.records.len(),
        "n_failures": result.n_failures,
        "n_selective_fired": result
            .records
            .iter()
            .filter(|r| r.selective_retrieval_fired)
            .count(),
        "seed": meta.seed,
        "config_fingerprint": meta.config_fingerprint,
        "tool_version": meta.tool_version,
    });
    std::fs::write(
        config.output_dir.join("aggregate.json"),
        serde_json::to_string_pretty(&aggregate).unwrap(),
    )?;

    let dataset_name = config
        .dataset
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "dataset".to_string());
    println!("{:<20} {:>6} {:>6}", "dataset", "EM", "F1");
    println!(
        "{:<20} {:>6.1} {:>6.1}",
        dataset_name,
        result.em_mean * 100.0,
        result.f1_mean * 100.0
    );
    Ok(result)
}

/// Re-check the provenance of everything under the output directory.
pub fn cmd_verify(config: &RunConfig) -> Result<(), CliError> {
    let expected = config.fingerprint();
    let mut failures = Vec::new();
    let mut check = |name: &str, outcome: Option<Result<(), String>>| match outcome {
        None => println!("absent   {name}"),
        Some(Ok(())) => println!("ok       {name}"),
        Some(Err(reason)) => {
            println!("MISMATCH {name}: {reason}");
            failures.push(format!("{name}: {reason}"));
        }
    };

    let verify_meta = |meta: &ArtifactMeta| -> Result<(), String> {
        if meta.config_fingerprint != expected {
            return Err(format!(
                "config fingerprint {} does not match current config {}",
                meta.config_fingerprint, expected
            ));
        }
        if meta.seed != config.seed {
            return Err(format!("seed {} does not match config {}", meta.seed, config.seed));
        }
        Ok(())
    };

    let index_file = index_path(config);
    check(
        "index.bin",
        index_file.exists().then(|| {
            let (index, meta) = artifact::read_index(&index_file).map_err(|e| e.to_string())?;
            verify_meta(&meta)?;
            let rebuilt = similarity_params(config);
            if index.params_fingerprint() != rebuilt.fingerprint() {
                return Err("encoder parameters do not match the config".to_string());
            }
            Ok(())
        }),
    );

    let params_file = utility_dir(config).join("params.bin");
    let sidecar_file = utility_dir(config).join("checkpoint.json");
    check(
        "utility/params.bin",
        params_file.exists().then(|| {
            let params = EncoderParams::load(&params_file).map_err(|e| e.to_string())?;
            let sidecar: serde_json::Value = serde_json::from_str(
                &std::fs::read_to_string(&sidecar_file).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            let recorded = sidecar
                .get("params_fingerprint")
                .and_then(|v| v.as_str())
                .ok_or("checkpoint.json lacks params_fingerprint")?;
            if recorded != params.fingerprint() {
                return Err("params fingerprint does not match checkpoint.json".to_string());
            }
            let fingerprint = sidecar
                .get("config_fingerprint")
                .and_then(|v| v.as_str())
                .ok_or("checkpoint.json lacks config_fingerprint")?;
            if fingerprint != expected {
                return Err("checkpoint config fingerprint does not match".to_string());
            }
            Ok(())
        }),
    );

    let trace_file = utility_dir(config).join("loss_trace.csv");
    check(
        "utility/loss_trace.csv",
        trace_file.exists().then(|| {
            let raw = std::fs::read_to_string(&trace_file).map_err(|e| e.to_string())?;
            let first = raw.lines().next().ok_or("empty file")?;
            let meta = ArtifactMeta::parse_csv_comment(first).ok_or("missing meta comment")?;
            verify_meta(&meta)
        }),
    );

    let report_file = config.output_dir.join("report.csv");
    let aggregate_file = config.output_dir.join("aggregate.json");
    check(
        "report.csv",
        report_file.exists().then(|| {
            let raw = std::fs::read_to_string(&report_file).map_err(|e| e.to_string())?;
            let mut lines = raw.lines();
            let meta = ArtifactMeta::parse_csv_comment(lines.next().ok_or("empty file")?)
                .ok_or("missing meta comment")?;
            verify_meta(&meta)?;
            // Cross-check the aggregate against the per-query rows.
            if aggregate_file.exists() {
                let aggregate: serde_json::Value = serde_json::from_str(
                    &std::fs::read_to_string(&aggregate_file).map_err(|e| e.to_string())?,
                )
                .map_err(|e| e.to_string())?;
                let rows: Vec<&str> = lines.skip(1).filter(|l| !l.is_empty()).collect();
                let em_sum: f64 = rows
                    .iter()
                    .map(|row| {
                        row.split(',')
                            .nth(1)
                            .and_then(|v| v.parse::<f64>().ok())
                            .unwrap_or(0.0)
                    })
                    .sum();
                let em_mean = em_sum / rows.len().max(1) as f64;
                let recorded = aggregate.get("em_mean").and_then(|v| v.as_f64()).unwrap_or(-1.0);
                if (em_mean - recorded).abs() > 1e-12 {
                    return Err(format!(
                        "aggregate em_mean {recorded} does not match report rows {em_mean}"
                    ));
                }
            }
            Ok(())
        }),
    );

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "verification failed: {}",
            failures.join("; ")
        )))
    }
}
