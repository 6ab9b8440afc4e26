//! Retrieval pipeline: similarity pool, utility rescoring, selective
//! retrieval, and fusion into the admitted document set.
//!
//! One pipeline holds two indices over the same corpus - one per encoder.
//! For a query it retrieves the top `retrieve_k` documents by similarity,
//! rescores that pool (plus the empty-string sentinel, whose utility score
//! is the constant 0) with the utility encoder, and either skips retrieval
//! when the sentinel strictly tops the utility ranking or admits the
//! rank-threshold union of both rankings.

use thiserror::Error;

use crate::fusion::{self, FusionConfig, FusionError};
use crate::retriever::{
    self, Document, Index, RetrieverError, ScoreSource, ScoredDoc, SENTINEL_ID,
};
use crate::textcore::{self, EncoderParams, TextcoreError};
use crate::utility::{self, UtilityError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retriever(#[from] RetrieverError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Encoder(#[from] TextcoreError),
}

/// What one query produced on its way to the generator.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    /// True when the utility model ranked the sentinel above every pool
    /// document; the admitted set is then empty.
    pub selective_fired: bool,
    /// Admitted documents in fusion order (utility-admitted first).
    pub admitted: Vec<Document>,
    /// Similarity scores of the retrieval pool, descending.
    pub sim_scored: Vec<ScoredDoc>,
    /// Utility scores of the pool plus the sentinel entry.
    pub util_scored: Vec<ScoredDoc>,
}

pub struct Pipeline {
    sim_index: Index,
    util_index: Index,
    fusion: FusionConfig,
    /// Total document budget of the test-time retriever; also the size of
    /// the similarity-only baseline.
    total_k: usize,
    /// Candidate pool depth for fusion and utility rescoring.
    retrieve_k: usize,
    selective_enabled: bool,
}

impl Pipeline {
    pub fn new(
        corpus: &[Document],
        sim_params: &EncoderParams,
        util_params: &EncoderParams,
        fusion: FusionConfig,
        total_k: usize,
        retrieve_k: usize,
    ) -> Result<Self, PipelineError> {
        let sim_index = retriever::build_index(corpus, sim_params)?;
        let util_index = retriever::build_index(corpus, util_params)?;
        Ok(Self {
            sim_index,
            util_index,
            fusion,
            total_k,
            retrieve_k,
            selective_enabled: true,
        })
    }

    #[must_use]
    pub fn with_selective(mut self, enabled: bool) -> Self {
        self.selective_enabled = enabled;
        self
    }

    #[must_use]
    pub fn sim_index(&self) -> &Index {
        &self.sim_index
    }

    #[must_use]
    pub fn util_index(&self) -> &Index {
        &self.util_index
    }

    #[must_use]
    pub fn fusion_config(&self) -> &FusionConfig {
        &self.fusion
    }

    /// Similarity scores of the candidate pool.
    pub fn pool(&self, query_text: &str) -> Result<Vec<ScoredDoc>, PipelineError> {
        Ok(retriever::retrieve_topk(
            &self.sim_index,
            query_text,
            self.retrieve_k,
        )?)
    }

    /// Utility scores for the given documents plus the sentinel, descending.
    pub fn utility_scores(
        &self,
        query_text: &str,
        pool: &[ScoredDoc],
    ) -> Result<Vec<ScoredDoc>, PipelineError> {
        let params = self.util_index.params();
        let query_features =
            textcore::featurize(&textcore::tokenize(query_text), params.in_dim());
        let query_emb = textcore::encode(params, &query_features)?;
        let mut scored = Vec::with_capacity(pool.len() + 1);
        for entry in pool {
            let emb = self
                .util_index
                .embedding(&entry.doc_id)
                .ok_or_else(|| UtilityError::UnknownDoc(entry.doc_id.clone()))?;
            scored.push(ScoredDoc {
                doc_id: entry.doc_id.clone(),
                score: textcore::cosine(&query_emb, emb)?,
                source: ScoreSource::Utility,
            });
        }
        // The sentinel embeds to the zero vector: utility 0 by convention.
        scored.push(ScoredDoc {
            doc_id: SENTINEL_ID.to_string(),
            score: 0.0,
            source: ScoreSource::Utility,
        });
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        Ok(scored)
    }

    /// Full first-stage run: retrieve, rescore, selective-retrieval check,
    /// fuse.
    pub fn admit(&self, query_text: &str) -> Result<StageOutcome, PipelineError> {
        let sim_scored = self.pool(query_text)?;
        let util_scored = self.utility_scores(query_text, &sim_scored)?;
        if self.selective_enabled && utility::selective_retrieval(&util_scored)? {
            return Ok(StageOutcome {
                selective_fired: true,
                admitted: Vec::new(),
                sim_scored,
                util_scored,
            });
        }
        let util_docs_only: Vec<ScoredDoc> = util_scored
            .iter()
            .filter(|s| s.doc_id != SENTINEL_ID)
            .cloned()
            .collect();
        let admitted_set = fusion::fuse(&sim_scored, &util_docs_only, &self.fusion)?;
        let admitted = admitted_set
            .doc_ids
            .iter()
            .map(|id| {
                self.sim_index
                    .document(id)
                    .cloned()
                    .ok_or_else(|| UtilityError::UnknownDoc(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StageOutcome {
            selective_fired: false,
            admitted,
            sim_scored,
            util_scored,
        })
    }

    /// Similarity-only baseline: the top `total_k` documents with no
    /// utility model, no selective retrieval and no fusion.
    pub fn similarity_only(&self, query_text: &str) -> Result<StageOutcome, PipelineError> {
        let sim_scored = retriever::retrieve_topk(&self.sim_index, query_text, self.total_k)?;
        let admitted = sim_scored
            .iter()
            .map(|s| {
                self.sim_index
                    .document(&s.doc_id)
                    .cloned()
                    .ok_or_else(|| UtilityError::UnknownDoc(s.doc_id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StageOutcome {
            selective_fired: false,
            admitted,
            sim_scored,
            util_scored: Vec::new(),
        })
    }
}
