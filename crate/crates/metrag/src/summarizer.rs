//! Task-adaptive summarization: instruction templating, teacher-distillation
//! and alignment corpora, a query-focused extractive summarizer, and the
//! alignment losses.
//!
//! No model weights are trained in this crate. The extractive summarizer
//! stands in for a fine-tuned abstractive model, while the distillation
//! corpus (instruction-summary pairs), the alignment corpus
//! (prompt/response/correctness triples), and the composed alignment
//! objective - Bernoulli BCE over implicit policy rewards
//! `beta * (log pi_theta - log pi_sft)` - are fully implemented and
//! gradient-checked so an external fine-tuning harness can consume them.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalgen::{exact_match, render_qa_prompt, Knowledge};
use crate::oracle::{GenRequest, Oracle};
use crate::pipeline::Pipeline;
use crate::retriever::Document;
use crate::textcore::tokenize;
use crate::utility::Query;

#[derive(Debug, Error)]
pub enum SummarizerError {
    #[error("no documents to summarize")]
    EmptyDocs,
    #[error("originals are empty")]
    EmptyOriginal,
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("rewards and labels have different lengths: {rewards} vs {labels}")]
    LengthMismatch { rewards: usize, labels: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("pipeline failure: {0}")]
    Pipeline(String),
}

/// Rendered summarization instruction plus the provenance of its slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryInstruction {
    pub rendered_text: String,
    pub query_id: String,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionSummaryPair {
    pub query_id: String,
    pub instruction: String,
    pub summary: String,
}

/// One alignment example: the end-task prompt, the model response, and
/// whether the response was correct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentTriple {
    pub query_id: String,
    pub prompt: String,
    pub response: String,
    pub label: u8,
}

/// Log-probabilities of one response under the policy being aligned and
/// under the frozen reference policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyLogProbs {
    pub logp_policy: f64,
    pub logp_sft: f64,
}

/// Render the summarization instruction. Byte-stable; pinned by a golden
/// fixture. Documents are joined by newline in the given order, so
/// reordering them changes the bytes.
pub fn render_summary_instruction(
    query: &Query,
    docs: &[Document],
) -> Result<SummaryInstruction, SummarizerError> {
    if docs.is_empty() {
        return Err(SummarizerError::EmptyDocs);
    }
    let doc_block = docs
        .iter()
        .map(Document::display_text)
        .collect::<Vec<_>>()
        .join("\n");
    let rendered_text = format!(
        "Instruction:\nYou are an excellent summary generation robot. \
         Given the following question (Question) and texts (Docs), you need to summarize \
         these texts (Docs) into a concise abstract to adequately address the corresponding \
         question.\nQuestion:\n{}\nDocs:\n{}\nSummary:",
        query.text, doc_block
    );
    Ok(SummaryInstruction {
        rendered_text,
        query_id: query.id.clone(),
        doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
    })
}

/// Build the instruction-summary distillation corpus: render the
/// instruction over each query's admitted documents and ask the teacher for
/// the summary. Per-query failures and empty generations are skipped.
pub fn build_distillation_corpus(
    queries: &[Query],
    pipeline: &Pipeline,
    teacher: &dyn Oracle,
    seed: i64,
) -> Result<Vec<InstructionSummaryPair>, SummarizerError> {
    let mut pairs = Vec::new();
    for query in queries {
        let stage = pipeline
            .admit(&query.text)
            .map_err(|e| SummarizerError::Pipeline(e.to_string()))?;
        if stage.admitted.is_empty() {
            continue;
        }
        let instruction = render_summary_instruction(query, &stage.admitted)?;
        let generated = teacher.generate(&GenRequest {
            prompt: instruction.rendered_text.clone(),
            max_tokens: 256,
            seed,
        });
        match generated {
            Ok(summary) if !summary.trim().is_empty() => pairs.push(InstructionSummaryPair {
                query_id: query.id.clone(),
                instruction: instruction.rendered_text,
                summary,
            }),
            Ok(_) => eprintln!("skipping {}: teacher returned an empty summary", query.id),
            Err(e) => eprintln!("skipping {}: teacher failed: {e}", query.id),
        }
    }
    Ok(pairs)
}

/// Sentence with its selection metadata.
struct Candidate<'a> {
    text: &'a str,
    score: f64,
    position: usize,
}

/// Greedy query-focused extractive summary. Sentences (split on `.`, `?`,
/// `!`) are ranked by normalized token overlap with the query - shared
/// unique tokens over the sentence's unique token count - with ties broken
/// by document order, then selected while they fit the character budget.
/// Selected sentences are emitted in selection order, each closed with a
/// period. Only whole sentences appear, so a budget below the best
/// sentence can produce an empty summary. Callers should allow at least 32
/// characters.
#[must_use]
pub fn extractive_summarize(query: &Query, docs: &[Document], max_chars: usize) -> String {
    let query_tokens: std::collections::BTreeSet<String> =
        tokenize(&query.text).into_iter().collect();
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut position = 0usize;
    for doc in docs {
        for sentence in doc.text.split(['.', '?', '!']) {
            let sentence = sentence.trim();
            if sentence.is_empty() {
                continue;
            }
            let tokens: std::collections::BTreeSet<String> =
                tokenize(sentence).into_iter().collect();
            if tokens.is_empty() {
                continue;
            }
            let overlap = tokens.intersection(&query_tokens).count();
            candidates.push(Candidate {
                text: sentence,
                score: overlap as f64 / tokens.len() as f64,
                position,
            });
            position += 1;
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.position.cmp(&b.position))
    });

    let mut out = String::new();
    for candidate in &candidates {
        // One char for the closing period, one for the joining space.
        let cost = candidate.text.chars().count() + 1 + usize::from(!out.is_empty());
        if out.chars().count() + cost > max_chars {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(candidate.text);
        out.push('.');
    }
    out
}

/// Build the alignment corpus: summarize each query's admitted documents,
/// ask the oracle for the end-task answer over that summary, and label it
/// with containment exact match. Per-query oracle failures are skipped.
pub fn build_alignment_corpus(
    queries: &[Query],
    pipeline: &Pipeline,
    answer_oracle: &dyn Oracle,
    max_chars: usize,
    seed: i64,
) -> Result<Vec<AlignmentTriple>, SummarizerError> {
    let mut triples = Vec::new();
    for query in queries {
        let stage = pipeline
            .admit(&query.text)
            .map_err(|e| SummarizerError::Pipeline(e.to_string()))?;
        let summary = extractive_summarize(query, &stage.admitted, max_chars);
        let prompt = render_qa_prompt(query, &Knowledge::summary(summary));
        let response = answer_oracle.generate(&GenRequest {
            prompt: prompt.clone(),
            max_tokens: 32,
            seed,
        });
        match response {
            Ok(response) => {
                let label = exact_match(&response, &query.gold_answers)
                    .map_err(|e| SummarizerError::Pipeline(e.to_string()))?;
                triples.push(AlignmentTriple {
                    query_id: query.id.clone(),
                    prompt,
                    response,
                    label,
                });
            }
            Err(e) => eprintln!("skipping {}: answer oracle failed: {e}", query.id),
        }
    }
    Ok(triples)
}

/// `p(correct | reward) = sigmoid(reward)`.
#[must_use]
pub fn correctness_prob(reward: f64) -> f64 {
    1.0 / (1.0 + (-reward).exp())
}

/// Numerically stable `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Bernoulli binary cross-entropy, summed over items:
/// `-Z ln(sigmoid(r)) - (1-Z) ln(1 - sigmoid(r))`, evaluated in softplus
/// form so extreme rewards cannot overflow.
pub fn reward_bce_loss(rewards: &[f64], labels: &[u8]) -> Result<f64, SummarizerError> {
    if rewards.len() != labels.len() {
        return Err(SummarizerError::LengthMismatch {
            rewards: rewards.len(),
            labels: labels.len(),
        });
    }
    if rewards.is_empty() {
        return Err(SummarizerError::EmptyCorpus);
    }
    Ok(rewards
        .iter()
        .zip(labels)
        .map(|(&r, &z)| if z == 1 { softplus(-r) } else { softplus(r) })
        .sum())
}

/// Implicit reward of a response: `beta * (log pi_theta - log pi_sft)`.
pub fn dpo_implicit_reward(lp: &PolicyLogProbs, beta: f64) -> Result<f64, SummarizerError> {
    if beta <= 0.0 {
        return Err(SummarizerError::NonPositiveBeta(beta));
    }
    Ok(beta * (lp.logp_policy - lp.logp_sft))
}

/// The engine's alignment objective: BCE of the implicit rewards against
/// the correctness labels. Exposed for any external policy-updating
/// harness.
pub fn alignment_objective(
    corpus: &[AlignmentTriple],
    logprobs: &[PolicyLogProbs],
    beta: f64,
) -> Result<f64, SummarizerError> {
    Ok(alignment_objective_with_grad(corpus, logprobs, beta)?.0)
}

/// Objective value plus its gradient with respect to each `logp_policy`:
/// `dL/dlogp_i = beta * (sigmoid(r_i) - Z_i)`.
pub fn alignment_objective_with_grad(
    corpus: &[AlignmentTriple],
    logprobs: &[PolicyLogProbs],
    beta: f64,
) -> Result<(f64, Vec<f64>), SummarizerError> {
    if corpus.len() != logprobs.len() {
        return Err(SummarizerError::LengthMismatch {
            rewards: logprobs.len(),
            labels: corpus.len(),
        });
    }
    if corpus.is_empty() {
        return Err(SummarizerError::EmptyCorpus);
    }
    let rewards = logprobs
        .iter()
        .map(|lp| dpo_implicit_reward(lp, beta))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<u8> = corpus.iter().map(|t| t.label).collect();
    let loss = reward_bce_loss(&rewards, &labels)?;
    let grad = rewards
        .iter()
        .zip(&labels)
        .map(|(&r, &z)| beta * (correctness_prob(r) - f64::from(z)))
        .collect();
    Ok((loss, grad))
}

/// Character-length ratio of the summary to the concatenated originals.
pub fn compression_ratio(summary: &str, originals: &[Document]) -> Result<f64, SummarizerError> {
    if originals.is_empty() {
        return Err(SummarizerError::EmptyOriginal);
    }
    let total: usize = originals.iter().map(|d| d.text.chars().count()).sum();
    if total == 0 {
        return Err(SummarizerError::EmptyOriginal);
    }
    Ok(summary.chars().count() as f64 / total as f64)
}

/// Write instruction-summary pairs as record-per-line JSON.
pub fn save_distillation_corpus(
    pairs: &[InstructionSummaryPair],
    path: &Path,
) -> Result<(), SummarizerError> {
    let mut out = String::new();
    for pair in pairs {
        out.push_str(&serde_json::to_string(pair).expect("pair serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_distillation_corpus(path: &Path) -> Result<Vec<InstructionSummaryPair>, SummarizerError> {
    read_jsonl(path)
}

/// Write alignment triples as record-per-line JSON.
pub fn save_alignment_corpus(
    triples: &[AlignmentTriple],
    path: &Path,
) -> Result<(), SummarizerError> {
    let mut out = String::new();
    for triple in triples {
        out.push_str(&serde_json::to_string(triple).expect("triple serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_alignment_corpus(path: &Path) -> Result<Vec<AlignmentTriple>, SummarizerError> {
    read_jsonl(path)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, SummarizerError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line).map_err(|e| SummarizerError::ParseError {
                line: idx + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(rows)
}
