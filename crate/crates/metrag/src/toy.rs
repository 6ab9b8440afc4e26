//! Bundled offline corpora: a 50-document, 20-query toy collection and a
//! five-document miniature built around one query whose most similar
//! document carries no useful information.
//!
//! The toy collection is deliberately structured. Six queries have their
//! answer-bearing document among the top two similarity hits, five at
//! similarity ranks three to five, five at ranks six to nine, and four
//! (the `qd*` ids) have no answer-bearing document at all - the mock
//! oracle knows those answers without context. Every example and test in
//! the repo can run against these fixtures with no network access.

use crate::oracle::MockOracle;
use crate::retriever::Document;
use crate::utility::Query;

const TOY_CORPUS: &str = include_str!("../data/toy_corpus.jsonl");
const TOY_QUERIES: &str = include_str!("../data/toy_queries.jsonl");
const TOY_PARAMETRIC: &str = include_str!("../data/toy_parametric.jsonl");
const INVERSION_CORPUS: &str = include_str!("../data/inversion_corpus.jsonl");
const INVERSION_QUERIES: &str = include_str!("../data/inversion_queries.jsonl");

/// Long single-document fixture used by the summarizer tests: 4203
/// characters about Walter de la Pole and his relatives.
pub const WALTER_ORIGINAL: &str = include_str!("../data/walter_original.txt");

/// The paired reference summary (44 characters).
pub const WALTER_SUMMARY: &str = "Walter de la Pole was an English politician.";

fn parse_docs(raw: &str) -> Vec<Document> {
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled corpus line parses"))
        .collect()
}

fn parse_queries(raw: &str) -> Vec<Query> {
    #[derive(serde::Deserialize)]
    struct Row {
        id: String,
        question: String,
        answers: Vec<String>,
    }
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let row: Row = serde_json::from_str(l).expect("bundled query line parses");
            Query {
                id: row.id,
                text: row.question,
                gold_answers: row.answers,
            }
        })
        .collect()
}

#[must_use]
pub fn corpus() -> Vec<Document> {
    parse_docs(TOY_CORPUS)
}

#[must_use]
pub fn queries() -> Vec<Query> {
    parse_queries(TOY_QUERIES)
}

/// The `(question, answer)` pairs the mock oracle can answer with no
/// context at all.
#[must_use]
pub fn parametric_pairs() -> Vec<(String, String)> {
    #[derive(serde::Deserialize)]
    struct Row {
        question: String,
        answer: String,
    }
    TOY_PARAMETRIC
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let row: Row = serde_json::from_str(l).expect("bundled parametric line parses");
            (row.question, row.answer)
        })
        .collect()
}

#[must_use]
pub fn inversion_corpus() -> Vec<Document> {
    parse_docs(INVERSION_CORPUS)
}

#[must_use]
pub fn inversion_queries() -> Vec<Query> {
    parse_queries(INVERSION_QUERIES)
}

#[must_use]
pub fn walter_document() -> Document {
    Document {
        id: "walter".to_string(),
        title: String::new(),
        text: WALTER_ORIGINAL.to_string(),
    }
}

/// Mock oracle loaded with the gold answers of the given queries plus the
/// bundled parametric table.
#[must_use]
pub fn mock_oracle_for(queries: &[Query]) -> MockOracle {
    let mut oracle = MockOracle::new();
    for query in queries {
        oracle.add_gold(&query.text, &query.gold_answers);
    }
    for (question, answer) in parametric_pairs() {
        oracle.add_parametric(&question, &answer);
    }
    oracle
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixtures_parse() {
        assert_eq!(corpus().len(), 50);
        assert_eq!(queries().len(), 20);
        assert_eq!(parametric_pairs().len(), 4);
        assert_eq!(inversion_corpus().len(), 5);
        assert_eq!(inversion_queries().len(), 1);
        assert_eq!(WALTER_ORIGINAL.chars().count(), 4203);
        assert_eq!(WALTER_SUMMARY.chars().count(), 44);
    }

    #[test]
    fn every_toy_query_has_answers() {
        for q in queries() {
            assert!(!q.gold_answers.is_empty(), "{} lacks answers", q.id);
        }
    }
}
