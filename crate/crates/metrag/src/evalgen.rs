//! Knowledge-augmented answer generation and EM/F1 evaluation.
//!
//! The prompt renderers here are byte-stable: golden fixtures under
//! `tests/fixtures/` pin their exact output. Exact match is
//! containment-based - a prediction counts as correct when any normalized
//! gold answer appears as a contiguous, token-aligned substring of the
//! normalized prediction - which differs materially from strict equality
//! and is pinned by tests.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{GenRequest, Oracle, OracleError};
use crate::pipeline::{Pipeline, StageOutcome};
use crate::retriever::Document;
use crate::utility::Query;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("gold answer list is empty")]
    EmptyGolds,
    #[error("dataset file not found: {0}")]
    FileNotFound(String),
    #[error("dataset parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("duplicate query id: {0}")]
    DuplicateId(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle failure: {0}")]
    Oracle(#[from] OracleError),
    #[error("pipeline failure: {0}")]
    Pipeline(String),
}

/// External knowledge handed to the answer generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Knowledge {
    kind: KnowledgeKind,
    text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeKind {
    RawDocs,
    Summary,
    None,
}

impl Knowledge {
    #[must_use]
    pub fn raw_docs(text: String) -> Self {
        Self {
            kind: KnowledgeKind::RawDocs,
            text,
        }
    }

    #[must_use]
    pub fn summary(text: String) -> Self {
        Self {
            kind: KnowledgeKind::Summary,
            text,
        }
    }

    /// No external knowledge; renders an empty Info section.
    #[must_use]
    pub fn none() -> Self {
        Self {
            kind: KnowledgeKind::None,
            text: String::new(),
        }
    }

    #[must_use]
    pub fn kind(&self) -> KnowledgeKind {
        self.kind
    }

    #[must_use]
    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Render the answer-generation prompt. Byte-stable; pinned by a golden
/// fixture.
#[must_use]
pub fn render_qa_prompt(query: &Query, knowledge: &Knowledge) -> String {
    format!(
        "Instruction:\nYou are an AI assistant for answering questions. \
         Based on the given question (Question) and the corresponding information (Info), \
         please provide the correct answer as concise as possible according to the info \
         and your commonsense.\nInfo:\n{}\nQuestion:\n{}\nAnswer:\nPlease answer the question in the form of 2 or 3 words.",
        knowledge.text(),
        query.text
    )
}

/// Render the utility-model training prompt. The with-document variant is
/// used when a real document is present; the sentinel and `None` route to
/// the no-retrieval variant. Pass an empty `answer` to obtain the scoring
/// prefix; appending the answer then reproduces the full template.
#[must_use]
pub fn render_utility_prompt(query: &Query, doc: Option<&Document>, answer: &str) -> String {
    match doc {
        Some(d) if !d.is_sentinel() => format!(
            "Please answer the question based on the given context. Question: {} \
             The context related to the question is as follows: {}. Answer: {}",
            query.text,
            d.display_text(),
            answer
        ),
        _ => format!(
            "Please answer the question. Question: {} Answer: {}",
            query.text, answer
        ),
    }
}

/// Generate an answer for the query over the given knowledge. Only trailing
/// whitespace is stripped from the oracle output.
pub fn answer(
    oracle: &dyn Oracle,
    query: &Query,
    knowledge: &Knowledge,
    seed: i64,
) -> Result<String, OracleError> {
    let prompt = render_qa_prompt(query, knowledge);
    let raw = oracle.generate(&GenRequest {
        prompt,
        max_tokens: 32,
        seed,
    })?;
    Ok(raw.trim_end().to_string())
}

/// Lowercase, drop punctuation characters, remove the articles `a`, `an`,
/// `the` as whole words, and collapse whitespace. Idempotent.
#[must_use]
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Containment exact match: 1 when any normalized gold answer occurs as a
/// token-aligned contiguous substring of the normalized prediction.
pub fn exact_match(prediction: &str, golds: &[String]) -> Result<u8, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    let pred = normalize_answer(prediction);
    let padded_pred = format!(" {pred} ");
    for gold in golds {
        let g = normalize_answer(gold);
        let hit = if g.is_empty() {
            pred.is_empty()
        } else {
            padded_pred.contains(&format!(" {g} "))
        };
        if hit {
            return Ok(1);
        }
    }
    Ok(0)
}

fn token_counts(text: &str) -> std::collections::BTreeMap<&str, usize> {
    let mut counts = std::collections::BTreeMap::new();
    for token in text.split_whitespace() {
        *counts.entry(token).or_insert(0) += 1;
    }
    counts
}

/// Token-level F1 on normalized multiset overlap, maximized over golds.
/// Both sides empty scores 1; exactly one empty scores 0.
pub fn token_f1(prediction: &str, golds: &[String]) -> Result<f64, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    let pred_norm = normalize_answer(prediction);
    let pred_counts = token_counts(&pred_norm);
    let pred_total: usize = pred_counts.values().sum();
    let mut best: f64 = 0.0;
    for gold in golds {
        let gold_norm = normalize_answer(gold);
        let gold_counts = token_counts(&gold_norm);
        let gold_total: usize = gold_counts.values().sum();
        let f1 = if pred_total == 0 && gold_total == 0 {
            1.0
        } else if pred_total == 0 || gold_total == 0 {
            0.0
        } else {
            let overlap: usize = pred_counts
                .iter()
                .map(|(tok, &n)| n.min(*gold_counts.get(tok).unwrap_or(&0)))
                .sum();
            if overlap == 0 {
                0.0
            } else {
                let precision = overlap as f64 / pred_total as f64;
                let recall = overlap as f64 / gold_total as f64;
                2.0 * precision * recall / (precision + recall)
            }
        };
        best = best.max(f1);
    }
    Ok(best)
}

/// Per-query evaluation record. The extra columns back the CSV report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    pub prediction: String,
    pub em: u8,
    pub f1: f64,
    pub selective_retrieval_fired: bool,
    pub n_docs_admitted: usize,
    pub summary_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub records: Vec<EvalRecord>,
    pub em_mean: f64,
    pub f1_mean: f64,
    pub n_failures: usize,
    pub config_fingerprint: String,
}

/// How the evaluation turns pipeline output into knowledge.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub knowledge: KnowledgeKind,
    pub summarize_max_chars: usize,
    /// When false the fusion stage is skipped and the top documents by
    /// similarity alone are used (the similarity-only ablation).
    pub use_fusion: bool,
    pub seed: i64,
    pub config_fingerprint: String,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            knowledge: KnowledgeKind::Summary,
            summarize_max_chars: 240,
            use_fusion: true,
            seed: 0,
            config_fingerprint: String::new(),
        }
    }
}

/// Run the full retrieve -> (selective retrieval) -> fuse -> summarize ->
/// answer -> score loop over a dataset. A per-query oracle failure records
/// zero scores and an error note instead of aborting the run.
pub fn evaluate(
    queries: &[Query],
    pipeline: &Pipeline,
    oracle: &dyn Oracle,
    opts: &EvalOptions,
) -> Result<EvalResult, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut records = Vec::with_capacity(queries.len());
    let mut failures = 0;
    for query in queries {
        let record = match evaluate_one(query, pipeline, oracle, opts) {
            Ok(record) => record,
            Err(EvalError::Oracle(e)) => {
                failures += 1;
                EvalRecord {
                    query_id: query.id.clone(),
                    prediction: String::new(),
                    em: 0,
                    f1: 0.0,
                    selective_retrieval_fired: false,
                    n_docs_admitted: 0,
                    summary_ratio: None,
                    error: Some(e.to_string()),
                }
            }
            Err(other) => return Err(other),
        };
        records.push(record);
    }
    let n = records.len() as f64;
    let em_mean = records.iter().map(|r| f64::from(r.em)).sum::<f64>() / n;
    let f1_mean = records.iter().map(|r| r.f1).sum::<f64>() / n;
    Ok(EvalResult {
        records,
        em_mean,
        f1_mean,
        n_failures: failures,
        config_fingerprint: opts.config_fingerprint.clone(),
    })
}

fn evaluate_one(
    query: &Query,
    pipeline: &Pipeline,
    oracle: &dyn Oracle,
    opts: &EvalOptions,
) -> Result<EvalRecord, EvalError> {
    let stage = if opts.use_fusion {
        pipeline
            .admit(&query.text)
            .map_err(|e| EvalError::Pipeline(e.to_string()))?
    } else {
        pipeline
            .similarity_only(&query.text)
            .map_err(|e| EvalError::Pipeline(e.to_string()))?
    };
    let (knowledge, summary_ratio) = knowledge_for(&stage, query, opts);
    let prediction = answer(oracle, query, &knowledge, opts.seed)?;
    let em = exact_match(&prediction, &query.gold_answers)?;
    let f1 = token_f1(&prediction, &query.gold_answers)?;
    Ok(EvalRecord {
        query_id: query.id.clone(),
        prediction,
        em,
        f1,
        selective_retrieval_fired: stage.selective_fired,
        n_docs_admitted: stage.admitted.len(),
        summary_ratio,
        error: None,
    })
}

fn knowledge_for(
    stage: &StageOutcome,
    query: &Query,
    opts: &EvalOptions,
) -> (Knowledge, Option<f64>) {
    if stage.selective_fired || stage.admitted.is_empty() || opts.knowledge == KnowledgeKind::None {
        return (Knowledge::none(), None);
    }
    match opts.knowledge {
        KnowledgeKind::RawDocs => {
            let text = stage
                .admitted
                .iter()
                .map(Document::display_text)
                .collect::<Vec<_>>()
                .join("\n");
            (Knowledge::raw_docs(text), None)
        }
        KnowledgeKind::Summary => {
            let summary =
                crate::summarizer::extractive_summarize(query, &stage.admitted, opts.summarize_max_chars);
            let ratio = crate::summarizer::compression_ratio(&summary, &stage.admitted).ok();
            (Knowledge::summary(summary), ratio)
        }
        KnowledgeKind::None => unreachable!("handled above"),
    }
}

/// Load a dataset of record-per-line JSON objects
/// `{"id","question","answers":[...]}`.
pub fn load_dataset(path: &Path) -> Result<Vec<Query>, EvalError> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        question: String,
        answers: Vec<String>,
    }
    let file = std::fs::File::open(path)
        .map_err(|_| EvalError::FileNotFound(path.display().to_string()))?;
    let reader = std::io::BufReader::new(file);
    let mut queries = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| EvalError::ParseError {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if row.answers.is_empty() {
            return Err(EvalError::ParseError {
                line: idx + 1,
                message: "answers must be non-empty".to_string(),
            });
        }
        if !seen.insert(row.id.clone()) {
            return Err(EvalError::DuplicateId(row.id));
        }
        queries.push(Query {
            id: row.id,
            text: row.question,
            gold_answers: row.answers,
        });
    }
    Ok(queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn query(text: &str) -> Query {
        Query {
            id: "q1".to_string(),
            text: text.to_string(),
            gold_answers: vec!["gold".to_string()],
        }
    }

    #[test]
    fn qa_prompt_contains_required_phrases() {
        let p = render_qa_prompt(&query("Where is Winterfell?"), &Knowledge::none());
        assert!(p.contains("Please answer the question in the form of 2 or 3 words."));
        assert!(p.contains("Info:\n\nQuestion:"));
    }

    #[test]
    fn qa_prompt_is_deterministic_and_slot_sensitive() {
        let q = query("Where is Winterfell?");
        let a = render_qa_prompt(&q, &Knowledge::summary("In the north.".to_string()));
        let b = render_qa_prompt(&q, &Knowledge::summary("In the north.".to_string()));
        assert_eq!(a, b);
        let none = render_qa_prompt(&q, &Knowledge::none());
        assert_ne!(a, none);
        // Only the Info section differs.
        let tail = "\nQuestion:";
        assert_eq!(
            a.split(tail).nth(1).unwrap(),
            none.split(tail).nth(1).unwrap()
        );
    }

    #[test]
    fn utility_prompt_variants() {
        let q = query("Who rules the north?");
        let doc = Document {
            id: "d1".to_string(),
            title: "North".to_string(),
            text: "The Starks rule.".to_string(),
        };
        let with = render_utility_prompt(&q, Some(&doc), "The Starks");
        assert!(with.contains("The context related to the question is as follows:"));
        let without = render_utility_prompt(&q, None, "The Starks");
        assert_eq!(
            without,
            "Please answer the question. Question: Who rules the north? Answer: The Starks"
        );
        let sentinel = Document::sentinel();
        assert_eq!(render_utility_prompt(&q, Some(&sentinel), "The Starks"), without);
    }

    #[test]
    fn scoring_prefix_plus_answer_reproduces_full_render() {
        let q = query("Who rules the north?");
        let doc = Document {
            id: "d1".to_string(),
            title: String::new(),
            text: "The Starks rule.".to_string(),
        };
        let prefix = render_utility_prompt(&q, Some(&doc), "");
        let full = render_utility_prompt(&q, Some(&doc), "The Starks");
        assert_eq!(format!("{prefix}The Starks"), full);
    }

    #[test]
    fn normalize_basic() {
        assert_eq!(
            normalize_answer("The Song of Ice and Fire."),
            "song of ice and fire"
        );
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("An  Apple,  a day"), "apple day");
    }

    #[test]
    fn exact_match_containment() {
        let golds = vec!["A Song of Ice and Fire".to_string()];
        assert_eq!(
            exact_match("george rr martin wrote a song of ice and fire", &golds).unwrap(),
            1
        );
        assert_eq!(exact_match("A Song of Ice and Fire", &golds).unwrap(), 1);
        assert_eq!(
            exact_match("unknown", &["Paris".to_string()]).unwrap(),
            0
        );
        assert!(matches!(exact_match("x", &[]), Err(EvalError::EmptyGolds)));
    }

    #[test]
    fn exact_match_requires_token_alignment() {
        // "art" appears inside "martin" but is not a token-aligned match.
        assert_eq!(exact_match("george martin", &["art".to_string()]).unwrap(), 0);
    }

    #[test]
    fn token_f1_cases() {
        // Two-token prediction and gold overlapping in exactly one token.
        let f1 = token_f1("red blue", &["blue green".to_string()]).unwrap();
        assert!((f1 - 0.5).abs() < 1e-12);
        assert_eq!(token_f1("exact answer", &["exact answer".to_string()]).unwrap(), 1.0);
        assert_eq!(token_f1("night", &["day".to_string()]).unwrap(), 0.0);
    }

    #[test]
    fn token_f1_takes_max_over_golds() {
        let golds = vec!["nothing shared".to_string(), "red blue".to_string()];
        assert_eq!(token_f1("red blue", &golds).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in ".{0,60}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once), once);
        }

        #[test]
        fn em_implies_positive_f1(
            pred_extra in "[a-z]{1,6}( [a-z]{1,6}){0,3}",
            gold in "[b-z]{2,6}( [b-z]{2,6}){0,2}",
        ) {
            // Build a prediction that contains the gold answer verbatim.
            let pred = format!("{pred_extra} {gold}");
            let golds = vec![gold];
            if exact_match(&pred, &golds).unwrap() == 1 {
                prop_assert!(token_f1(&pred, &golds).unwrap() > 0.0);
            }
        }
    }

    fn tiny_pipeline() -> (Pipeline, Vec<Query>, crate::oracle::MockOracle) {
        let params = crate::textcore::EncoderParams::identity(256);
        let docs = vec![
            Document {
                id: "echo".to_string(),
                title: String::new(),
                text: "who brews the winter ale, they ask".to_string(),
            },
            Document {
                id: "gold".to_string(),
                title: String::new(),
                text: "The cellar monks brew the winter ale.".to_string(),
            },
        ];
        let queries = vec![Query {
            id: "q1".to_string(),
            text: "who brews the winter ale".to_string(),
            gold_answers: vec!["the cellar monks".to_string()],
        }];
        let oracle = crate::oracle::MockOracle::new()
            .with_gold("who brews the winter ale", &["the cellar monks"]);
        let pipeline = Pipeline::new(
            &docs,
            &params,
            &params,
            crate::fusion::FusionConfig { k_sim: 2, k_util: 2 },
            2,
            2,
        )
        .unwrap();
        (pipeline, queries, oracle)
    }

    #[test]
    fn evaluate_scores_the_pipeline_and_is_deterministic() {
        let (pipeline, queries, oracle) = tiny_pipeline();
        let opts = EvalOptions::default();
        let a = evaluate(&queries, &pipeline, &oracle, &opts).unwrap();
        assert_eq!(a.records.len(), 1);
        assert_eq!(a.em_mean, 1.0);
        // The aggregate is exactly the mean of the records.
        let recomputed =
            a.records.iter().map(|r| f64::from(r.em)).sum::<f64>() / a.records.len() as f64;
        assert_eq!(recomputed, a.em_mean);
        assert!((0.0..=1.0).contains(&a.em_mean));
        assert!((0.0..=1.0).contains(&a.f1_mean));
        let b = evaluate(&queries, &pipeline, &oracle, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a.records).unwrap(),
            serde_json::to_string(&b.records).unwrap()
        );

        assert!(matches!(
            evaluate(&[], &pipeline, &oracle, &opts),
            Err(EvalError::EmptyDataset)
        ));
    }

    #[test]
    fn evaluate_degrades_per_query_on_oracle_failure() {
        struct BrokenOracle;
        impl Oracle for BrokenOracle {
            fn score_continuation(
                &self,
                _: &crate::oracle::ScoreRequest,
            ) -> Result<crate::oracle::ScoreResponse, OracleError> {
                Err(OracleError::MalformedResponse("broken".to_string()))
            }
            fn generate(&self, _: &GenRequest) -> Result<String, OracleError> {
                Err(OracleError::MalformedResponse("broken".to_string()))
            }
        }
        let (pipeline, queries, _) = tiny_pipeline();
        let result = evaluate(&queries, &pipeline, &BrokenOracle, &EvalOptions::default()).unwrap();
        assert_eq!(result.n_failures, 1);
        assert_eq!(result.records[0].em, 0);
        assert_eq!(result.records[0].f1, 0.0);
        assert!(result.records[0].error.is_some());
    }

    #[test]
    fn dataset_loader_happy_path_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"id\":\"q1\",\"question\":\"one?\",\"answers\":[\"1\"]}\n",
                "{\"id\":\"q2\",\"question\":\"two?\",\"answers\":[\"2\",\"too\"]}\n",
                "{\"id\":\"q3\",\"question\":\"three?\",\"answers\":[\"3\"]}\n",
            ),
        )
        .unwrap();
        let queries = load_dataset(&path).unwrap();
        assert_eq!(queries.len(), 3);
        assert_eq!(queries[1].gold_answers.len(), 2);

        let missing = dir.path().join("missing_answers.jsonl");
        std::fs::write(&missing, "{\"id\":\"q1\",\"question\":\"one?\"}\n").unwrap();
        match load_dataset(&missing) {
            Err(EvalError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }

        let dup = dir.path().join("dup.jsonl");
        std::fs::write(
            &dup,
            concat!(
                "{\"id\":\"q1\",\"question\":\"one?\",\"answers\":[\"1\"]}\n",
                "{\"id\":\"q1\",\"question\":\"again?\",\"answers\":[\"1\"]}\n",
            ),
        )
        .unwrap();
        assert!(matches!(load_dataset(&dup), Err(EvalError::DuplicateId(_))));

        assert!(matches!(
            load_dataset(Path::new("/nonexistent/data.jsonl")),
            Err(EvalError::FileNotFound(_))
        ));
    }
}
