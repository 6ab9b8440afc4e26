//! Corpus store, exact top-k cosine retrieval, and score-to-likelihood
//! softmax with temperature.
//!
//! Retrieval is a brute-force scan over all document embeddings. Corpora are
//! desk-scale, and exactness keeps every downstream test deterministic. Ties
//! break by ascending document id.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textcore::{self, EmbeddingVector, EncoderParams, FeatureVector, TextcoreError};

/// Reserved id of the empty-string pseudo-document used for selective
/// retrieval. It is the only document allowed to have empty text.
pub const SENTINEL_ID: &str = "__ES__";

#[derive(Debug, Error)]
pub enum RetrieverError {
    #[error("duplicate document id: {0}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("no scores to normalize")]
    EmptyScores,
    #[error("corpus file not found: {0}")]
    FileNotFound(String),
    #[error("corpus parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Encoder(#[from] TextcoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
}

impl Document {
    /// The empty-string pseudo-document.
    #[must_use]
    pub fn sentinel() -> Self {
        Self {
            id: SENTINEL_ID.to_string(),
            title: String::new(),
            text: String::new(),
        }
    }

    #[must_use]
    pub fn is_sentinel(&self) -> bool {
        self.id == SENTINEL_ID
    }

    /// Text form used everywhere a document is embedded or rendered into a
    /// prompt: `"title text"`, or just the text when the title is empty.
    #[must_use]
    pub fn display_text(&self) -> String {
        if self.title.is_empty() {
            self.text.clone()
        } else if self.text.is_empty() {
            self.title.clone()
        } else {
            format!("{} {}", self.title, self.text)
        }
    }
}

/// Which scorer produced a [`ScoredDoc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    Similarity,
    Utility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    pub source: ScoreSource,
}

/// Normalized likelihood over a document set, together with the temperature
/// that produced it. Entries keep the order of the input scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DocDistribution {
    entries: Vec<(String, f64)>,
    temperature: f64,
}

impl DocDistribution {
    #[must_use]
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    #[must_use]
    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, p)| *p).collect()
    }

    #[must_use]
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Immutable retrieval index: one embedding per document, produced by the
/// encoder whose parameters (and fingerprint) are stored alongside.
#[derive(Debug, Clone)]
pub struct Index {
    documents: Vec<Document>,
    embeddings: Vec<EmbeddingVector>,
    params: EncoderParams,
    params_fingerprint: String,
}

impl Index {
    #[must_use]
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    #[must_use]
    pub fn params(&self) -> &EncoderParams {
        &self.params
    }

    #[must_use]
    pub fn params_fingerprint(&self) -> &str {
        &self.params_fingerprint
    }

    #[must_use]
    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == doc_id)
    }

    #[must_use]
    pub fn embedding(&self, doc_id: &str) -> Option<&EmbeddingVector> {
        self.documents
            .iter()
            .position(|d| d.id == doc_id)
            .map(|i| &self.embeddings[i])
    }

    /// Reassemble an index from stored parts. Used by artifact loading;
    /// the embeddings are trusted to match the parameters.
    pub(crate) fn from_parts(
        documents: Vec<Document>,
        embeddings: Vec<EmbeddingVector>,
        params: EncoderParams,
    ) -> Result<Self, RetrieverError> {
        if documents.is_empty() {
            return Err(RetrieverError::EmptyCorpus);
        }
        if documents.len() != embeddings.len() {
            return Err(RetrieverError::ParseError {
                line: 0,
                message: "document/embedding count mismatch".to_string(),
            });
        }
        let params_fingerprint = params.fingerprint();
        Ok(Self {
            documents,
            embeddings,
            params,
            params_fingerprint,
        })
    }
}

fn embed_text(params: &EncoderParams, text: &str) -> Result<EmbeddingVector, TextcoreError> {
    let features = features_of(params, text);
    textcore::encode(params, &features)
}

fn features_of(params: &EncoderParams, text: &str) -> FeatureVector {
    textcore::featurize(&textcore::tokenize(text), params.in_dim())
}

/// Embed every document and build the index. Fails on duplicate ids or an
/// empty corpus.
pub fn build_index(corpus: &[Document], params: &EncoderParams) -> Result<Index, RetrieverError> {
    if corpus.is_empty() {
        return Err(RetrieverError::EmptyCorpus);
    }
    let mut seen = std::collections::BTreeSet::new();
    for doc in corpus {
        if !seen.insert(doc.id.as_str()) {
            return Err(RetrieverError::DuplicateId(doc.id.clone()));
        }
    }
    let embeddings = corpus
        .iter()
        .map(|doc| embed_text(params, &doc.display_text()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Index {
        documents: corpus.to_vec(),
        embeddings,
        params: params.clone(),
        params_fingerprint: params.fingerprint(),
    })
}

/// Rank the whole corpus by cosine against the query and keep the first
/// `min(k, corpus size)` entries. Descending score, ties by ascending id.
pub fn retrieve_topk(
    index: &Index,
    query_text: &str,
    k: usize,
) -> Result<Vec<ScoredDoc>, RetrieverError> {
    if index.is_empty() {
        return Err(RetrieverError::EmptyCorpus);
    }
    let query_emb = embed_text(&index.params, query_text)?;
    let mut scored: Vec<ScoredDoc> = index
        .documents
        .iter()
        .zip(&index.embeddings)
        .map(|(doc, emb)| {
            Ok(ScoredDoc {
                doc_id: doc.id.clone(),
                score: textcore::cosine(&query_emb, emb)?,
                source: ScoreSource::Similarity,
            })
        })
        .collect::<Result<Vec<_>, RetrieverError>>()?;
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Temperature softmax over raw scores: `p_i = exp(s_i/tau) / sum_j
/// exp(s_j/tau)`, computed with max-subtraction so large ratios cannot
/// overflow.
pub fn softmax_distribution(
    scores: &[ScoredDoc],
    temperature: f64,
) -> Result<DocDistribution, RetrieverError> {
    let raw: Vec<(String, f64)> = scores
        .iter()
        .map(|s| (s.doc_id.clone(), s.score))
        .collect();
    softmax_over(&raw, temperature)
}

/// Shared softmax kernel over `(id, value)` pairs.
pub(crate) fn softmax_over(
    values: &[(String, f64)],
    temperature: f64,
) -> Result<DocDistribution, RetrieverError> {
    if values.is_empty() {
        return Err(RetrieverError::EmptyScores);
    }
    if temperature <= 0.0 {
        return Err(RetrieverError::NonPositiveTemperature(temperature));
    }
    let max = values
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values
        .iter()
        .map(|(_, v)| ((v - max) / temperature).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    let entries = values
        .iter()
        .zip(&exps)
        .map(|((id, _), e)| (id.clone(), e / total))
        .collect();
    Ok(DocDistribution {
        entries,
        temperature,
    })
}

/// Load a corpus from a record-per-line JSON file with fields
/// `{"id","title","text"}`. Blank lines are skipped; the first malformed
/// line aborts the load with its 1-based line number.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>, RetrieverError> {
    let file = std::fs::File::open(path)
        .map_err(|_| RetrieverError::FileNotFound(path.display().to_string()))?;
    let reader = std::io::BufReader::new(file);
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| RetrieverError::ParseError {
            line: idx + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}
