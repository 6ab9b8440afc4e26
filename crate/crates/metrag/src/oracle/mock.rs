//! Deterministic mock oracle.
//!
//! The mock is a pure function of the request and two documented tables, so
//! every test that uses it is reproducible:
//!
//! Scoring rule. Let A be the normalized token set of the continuation
//! (the answer being scored). If the prompt carries no context section -
//! the no-retrieval utility prompt, or an empty Info section - the total
//! log-probability is -3.0. Otherwise it is -1.0 when the context contains
//! every token of A and -5.0 when it does not. The total is spread evenly
//! over the continuation's whitespace tokens.
//!
//! Generation rule. For an answer prompt, return the first gold answer
//! whose normalized tokens all appear in the Info section; otherwise answer
//! from the configured question-to-answer table (standing in for
//! parametric knowledge); otherwise `"unknown"`. For a summary prompt,
//! echo the first sentence of the Docs section containing a gold-answer
//! token, falling back to the first sentence.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use super::{GenRequest, Oracle, OracleError, ScoreRequest, ScoreResponse};
use crate::evalgen::normalize_answer;

const LOGPROB_SUPPORTED: f64 = -1.0;
const LOGPROB_NO_CONTEXT: f64 = -3.0;
const LOGPROB_UNSUPPORTED: f64 = -5.0;

const UTILITY_CONTEXT_MARKER: &str = "The context related to the question is as follows: ";
const SUMMARY_HEADER: &str = "Instruction:\nYou are an excellent summary generation robot";

/// Deterministic stand-in for a language model. See the module docs for the
/// exact scoring and generation rules.
#[derive(Debug, Default, Clone)]
pub struct MockOracle {
    /// normalized question -> gold answers (verbatim).
    gold_answers: BTreeMap<String, Vec<String>>,
    /// normalized question -> answer the model "knows" without context.
    parametric: BTreeMap<String, String>,
}

impl MockOracle {
    #[must_use]
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_gold(&mut self, question: &str, answers: &[String]) {
        self.gold_answers
            .insert(normalize_answer(question), answers.to_vec());
    }

    pub fn add_parametric(&mut self, question: &str, answer: &str) {
        self.parametric
            .insert(normalize_answer(question), answer.to_string());
    }

    #[must_use]
    pub fn with_gold(mut self, question: &str, answers: &[&str]) -> Self {
        let owned: Vec<String> = answers.iter().map(|s| s.to_string()).collect();
        self.add_gold(question, &owned);
        self
    }

    #[must_use]
    pub fn with_parametric(mut self, question: &str, answer: &str) -> Self {
        self.add_parametric(question, answer);
        self
    }

    fn golds_for(&self, question: &str) -> Option<&Vec<String>> {
        self.gold_answers.get(&normalize_answer(question))
    }
}

fn token_set(text: &str) -> BTreeSet<String> {
    normalize_answer(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Extract the question text from any of the three prompt families.
fn extract_question(prompt: &str) -> Option<&str> {
    if let Some(body) = prompt.split("Question:\n").nth(1) {
        // QA prompt ends the section at "\nAnswer:", the summary prompt at
        // "\nDocs:".
        let end = body.find("\nAnswer:").or_else(|| body.find("\nDocs:"));
        return Some(end.map_or(body, |i| &body[..i]));
    }
    if let Some(body) = prompt.split("Question: ").nth(1) {
        let end = body
            .find(" The context related to the question is as follows:")
            .or_else(|| body.find(" Answer:"));
        return Some(end.map_or(body, |i| &body[..i]));
    }
    None
}

/// Extract the context section: the retrieved document of the utility
/// prompt, the Info section of the answer prompt, or the Docs section of
/// the summary prompt. `None` means the prompt has no context at all.
fn extract_context(prompt: &str) -> Option<&str> {
    if let Some(body) = prompt.split(UTILITY_CONTEXT_MARKER).nth(1) {
        let end = body.rfind(". Answer:").unwrap_or(body.len());
        return Some(&body[..end]);
    }
    if let Some(body) = prompt.split("Info:\n").nth(1) {
        let end = body.find("\nQuestion:").unwrap_or(body.len());
        return Some(&body[..end]);
    }
    if let Some(body) = prompt.split("Docs:\n").nth(1) {
        let end = body.find("\nSummary:").unwrap_or(body.len());
        return Some(&body[..end]);
    }
    None
}

fn split_sentences(text: &str) -> impl Iterator<Item = &str> {
    text.split(['.', '?', '!'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

impl Oracle for MockOracle {
    fn score_continuation(&self, req: &ScoreRequest) -> Result<ScoreResponse, OracleError> {
        if req.continuation.is_empty() {
            return Err(OracleError::InvalidRequest("continuation must be non-empty"));
        }
        let context = extract_context(&req.prompt);
        let total = match context {
            None => LOGPROB_NO_CONTEXT,
            Some(ctx) if normalize_answer(ctx).is_empty() => LOGPROB_NO_CONTEXT,
            Some(ctx) => {
                let ctx_tokens = token_set(ctx);
                let answer_tokens = token_set(&req.continuation);
                if answer_tokens.iter().all(|t| ctx_tokens.contains(t)) {
                    LOGPROB_SUPPORTED
                } else {
                    LOGPROB_UNSUPPORTED
                }
            }
        };
        let n_tokens = req.continuation.split_whitespace().count().max(1);
        let per_token = total / n_tokens as f64;
        Ok(ScoreResponse::from_token_logprobs(vec![per_token; n_tokens]))
    }

    fn generate(&self, req: &GenRequest) -> Result<String, OracleError> {
        if req.prompt.starts_with(SUMMARY_HEADER) {
            return Ok(self.summarize(&req.prompt));
        }
        // Answer prompts (QA template or the utility templates) share the
        // same extraction rule.
        let question = extract_question(&req.prompt).unwrap_or("");
        let info_tokens = extract_context(&req.prompt)
            .map(token_set)
            .unwrap_or_default();
        if let Some(golds) = self.golds_for(question) {
            for gold in golds {
                let gold_tokens = token_set(gold);
                if !gold_tokens.is_empty() && gold_tokens.iter().all(|t| info_tokens.contains(t)) {
                    return Ok(gold.clone());
                }
            }
        }
        if let Some(known) = self.parametric.get(&normalize_answer(question)) {
            return Ok(known.clone());
        }
        let _ = req.seed; // the mock is already deterministic
        Ok("unknown".to_string())
    }
}

impl MockOracle {
    fn summarize(&self, prompt: &str) -> String {
        let docs = extract_context(prompt).unwrap_or("");
        let question = extract_question(prompt).unwrap_or("");
        let gold_tokens: BTreeSet<String> = self
            .golds_for(question)
            .map(|golds| golds.iter().flat_map(|g| token_set(g)).collect())
            .unwrap_or_default();
        let mut first: Option<&str> = None;
        for sentence in split_sentences(docs) {
            first.get_or_insert(sentence);
            let tokens = token_set(sentence);
            if gold_tokens.iter().any(|t| tokens.contains(t)) {
                return sentence.to_string();
            }
        }
        first.unwrap_or("").to_string()
    }
}
