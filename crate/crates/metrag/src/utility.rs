//! Utility model training: distill LLM answer-probability supervision into
//! the retriever encoder.
//!
//! For each training query the top-n similar documents (plus the
//! empty-string sentinel) form a window. The oracle scores the gold answer
//! against each window entry; those log-probabilities define a frozen
//! target distribution `P_U` (probability `exp(mean token log-prob)`,
//! temperature-softmaxed). Training runs plain SGD with linear warm-up on
//! the mean `KL(P_R || P_U)` over queries, where `P_R` is the
//! temperature-softmax of the encoder's cosine scores. Gradients flow only
//! through `P_R`; the oracle side stays fixed. That KL direction is
//! deliberate and load-bearing - reversing it changes the optimum.
//!
//! The sentinel embeds to the zero vector, so its similarity is the
//! constant 0: when every trained document score falls below it, retrieval
//! is skipped (selective retrieval).

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalgen::render_utility_prompt;
use crate::oracle::{Oracle, OracleError, ScoreRequest};
use crate::retriever::{
    self, DocDistribution, Document, Index, RetrieverError, ScoreSource, ScoredDoc,
};
use crate::textcore::{self, EncoderParams, FeatureVector, TextcoreError};

/// Fraction of total steps spent linearly ramping the learning rate.
const WARMUP_RATIO: f64 = 0.2;

#[derive(Debug, Error)]
pub enum UtilityError {
    #[error("window needs {needed} documents but only {available} were retrieved")]
    InsufficientDocs { needed: usize, available: usize },
    #[error("query {0} has no gold answers")]
    MissingGoldAnswer(String),
    #[error("document {0} is not in the index")]
    UnknownDoc(String),
    #[error("sentinel entry missing from utility scores")]
    MissingSentinel,
    #[error("distributions cover different id sets")]
    IdSetMismatch,
    #[error("second distribution has zero mass where the first does not")]
    ZeroInSecondArgument,
    #[error("no queries to train on")]
    EmptyQuerySet,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("loss diverged (non-finite) at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("oracle failure: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Retriever(#[from] RetrieverError),
    #[error(transparent)]
    Encoder(#[from] TextcoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub gold_answers: Vec<String>,
}

/// The documents a single query trains against. When `includes_es` is set
/// the sentinel sits last.
#[derive(Debug, Clone)]
pub struct TrainingWindow {
    pub query: Query,
    pub docs: Vec<Document>,
    pub includes_es: bool,
    pub answer: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityTrainConfig {
    pub temperature: f64,
    /// Step size for plain SGD. The default is tuned for the hashed-feature
    /// linear encoder at desk scale.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub window_size: usize,
    pub include_empty_string: bool,
    pub seed: u64,
}

impl Default for UtilityTrainConfig {
    fn default() -> Self {
        Self {
            temperature: 0.05,
            learning_rate: 0.05,
            epochs: 5,
            batch_size: 16,
            window_size: 5,
            include_empty_string: true,
            seed: 0,
        }
    }
}

impl UtilityTrainConfig {
    fn validate(&self) -> Result<(), UtilityError> {
        let positive = [
            ("temperature", self.temperature),
            ("learning_rate", self.learning_rate),
        ];
        for (name, value) in positive {
            if value <= 0.0 || !value.is_finite() {
                return Err(UtilityError::InvalidConfig(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.epochs == 0 || self.batch_size == 0 || self.window_size == 0 {
            return Err(UtilityError::InvalidConfig(
                "epochs, batch_size and window_size must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Trained parameters plus the per-epoch mean loss. Entry `e` is the mean
/// loss before epoch `e`'s updates; the final entry is the post-training
/// loss.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub loss_trace: Vec<(usize, f64)>,
}

/// Take the top-n retrieved documents (optionally plus the sentinel) and
/// attach the first gold answer.
pub fn build_training_window(
    query: &Query,
    retrieved: &[ScoredDoc],
    index: &Index,
    n: usize,
    include_es: bool,
) -> Result<TrainingWindow, UtilityError> {
    if retrieved.len() < n {
        return Err(UtilityError::InsufficientDocs {
            needed: n,
            available: retrieved.len(),
        });
    }
    let answer = query
        .gold_answers
        .first()
        .cloned()
        .ok_or_else(|| UtilityError::MissingGoldAnswer(query.id.clone()))?;
    let mut docs = Vec::with_capacity(n + usize::from(include_es));
    for scored in &retrieved[..n] {
        let doc = index
            .document(&scored.doc_id)
            .ok_or_else(|| UtilityError::UnknownDoc(scored.doc_id.clone()))?;
        docs.push(doc.clone());
    }
    if include_es {
        docs.push(Document::sentinel());
    }
    Ok(TrainingWindow {
        query: query.clone(),
        docs,
        includes_es: include_es,
        answer,
    })
}

/// Turn per-entry answer log-probabilities into the utility distribution:
/// each log-probability maps to a probability `exp(lp)` in (0,1], which is
/// then temperature-softmaxed.
pub fn utility_distribution(
    llm_logprobs: &[ScoredDoc],
    temperature: f64,
) -> Result<DocDistribution, UtilityError> {
    let values: Vec<(String, f64)> = llm_logprobs
        .iter()
        .map(|s| (s.doc_id.clone(), s.score.exp()))
        .collect();
    Ok(retriever::softmax_over(&values, temperature)?)
}

/// `KL(p || q) = sum_i p_i ln(p_i / q_i)` in nats, with the `0 ln 0 = 0`
/// convention. Requires the same ids in the same order.
pub fn kl_divergence(p: &DocDistribution, q: &DocDistribution) -> Result<f64, UtilityError> {
    if p.len() != q.len() {
        return Err(UtilityError::IdSetMismatch);
    }
    let mut total = 0.0;
    for ((id_p, prob_p), (id_q, prob_q)) in p.entries().iter().zip(q.entries()) {
        if id_p != id_q {
            return Err(UtilityError::IdSetMismatch);
        }
        if *prob_p == 0.0 {
            continue;
        }
        if *prob_q == 0.0 {
            return Err(UtilityError::ZeroInSecondArgument);
        }
        total += prob_p * (prob_p / prob_q).ln();
    }
    Ok(total)
}

/// True when the sentinel's utility score is strictly greater than every
/// document score. A tie keeps retrieval on.
pub fn selective_retrieval(utility_scores: &[ScoredDoc]) -> Result<bool, UtilityError> {
    let sentinel = utility_scores
        .iter()
        .find(|s| s.doc_id == retriever::SENTINEL_ID)
        .ok_or(UtilityError::MissingSentinel)?;
    Ok(utility_scores
        .iter()
        .filter(|s| s.doc_id != retriever::SENTINEL_ID)
        .all(|s| sentinel.score > s.score))
}

/// Loss and weight gradient for a single window.
///
/// Forward: `s_i = cosine(encode(W, q), encode(W, x_i))`, `P_R =
/// softmax(s/tau)`, `loss = KL(P_R || target)`. The softmax/KL chain gives
/// `dL/ds_j = p_j (ln(p_j/t_j) - loss) / tau`, which feeds
/// [`textcore::encoder_backward`]. Entries with empty features (the
/// sentinel) score a constant 0 and receive no gradient.
pub fn window_loss_and_grad(
    params: &EncoderParams,
    query_features: &FeatureVector,
    doc_features: &[FeatureVector],
    target: &[f64],
    temperature: f64,
) -> Result<(f64, Vec<f64>), UtilityError> {
    if doc_features.len() != target.len() {
        return Err(UtilityError::IdSetMismatch);
    }
    if temperature <= 0.0 {
        return Err(UtilityError::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let query_emb = textcore::encode(params, query_features)?;
    let mut scores = Vec::with_capacity(doc_features.len());
    for features in doc_features {
        let emb = textcore::encode(params, features)?;
        scores.push(textcore::cosine(&query_emb, &emb)?);
    }
    // Temperature softmax with max-subtraction.
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();

    let mut loss = 0.0;
    for (p, t) in probs.iter().zip(target) {
        if *p > 0.0 {
            if *t == 0.0 {
                return Err(UtilityError::ZeroInSecondArgument);
            }
            loss += p * (p / t).ln();
        }
    }
    let upstream: Vec<f64> = probs
        .iter()
        .zip(target)
        .map(|(p, t)| {
            if *p == 0.0 {
                0.0
            } else {
                p * ((p / t).ln() - loss) / temperature
            }
        })
        .collect();
    let grad = textcore::encoder_backward(params, doc_features, &upstream, query_features)?;
    Ok((loss, grad))
}

struct PreparedQuery {
    query_features: FeatureVector,
    doc_features: Vec<FeatureVector>,
    target: Vec<f64>,
}

fn features_for(params: &EncoderParams, text: &str) -> FeatureVector {
    textcore::featurize(&textcore::tokenize(text), params.in_dim())
}

/// Score every window entry once and freeze the target distribution.
fn prepare_query(
    query: &Query,
    index: &Index,
    params: &EncoderParams,
    config: &UtilityTrainConfig,
    oracle: &dyn Oracle,
) -> Result<PreparedQuery, UtilityError> {
    let retrieved = retriever::retrieve_topk(index, &query.text, config.window_size)?;
    let window = build_training_window(
        query,
        &retrieved,
        index,
        config.window_size.min(retrieved.len()),
        config.include_empty_string,
    )?;
    let mut logprob_scores = Vec::with_capacity(window.docs.len());
    for doc in &window.docs {
        let doc_arg = if doc.is_sentinel() { None } else { Some(doc) };
        let prompt = render_utility_prompt(&window.query, doc_arg, "");
        let response = oracle.score_continuation(&ScoreRequest {
            prompt,
            continuation: window.answer.clone(),
        })?;
        logprob_scores.push(ScoredDoc {
            doc_id: doc.id.clone(),
            score: response.mean_token_logprob(),
            source: ScoreSource::Utility,
        });
    }
    let target_dist = utility_distribution(&logprob_scores, config.temperature)?;
    let target = target_dist.probabilities();
    Ok(PreparedQuery {
        query_features: features_for(params, &query.text),
        doc_features: window
            .docs
            .iter()
            .map(|d| features_for(params, &d.display_text()))
            .collect(),
        target,
    })
}

/// Distill the oracle's utility supervision into the encoder.
///
/// Oracle scores are computed once per (query, document) pair up front;
/// the loop itself is pure SGD and bit-deterministic for a given seed.
pub fn train_utility(
    config: &UtilityTrainConfig,
    queries: &[Query],
    index: &Index,
    init_params: &EncoderParams,
    oracle: &dyn Oracle,
) -> Result<TrainOutcome, UtilityError> {
    config.validate()?;
    if queries.is_empty() {
        return Err(UtilityError::EmptyQuerySet);
    }
    let prepared: Vec<PreparedQuery> = queries
        .iter()
        .map(|q| prepare_query(q, index, init_params, config, oracle))
        .collect::<Result<_, _>>()?;

    let mut params = init_params.clone();
    let mut rng = StdRng::seed_from_u64(config.seed);
    let batches_per_epoch = queries.len().div_ceil(config.batch_size);
    let total_steps = config.epochs * batches_per_epoch;
    let warmup_steps = ((total_steps as f64) * WARMUP_RATIO).round() as usize;
    let mut step = 0usize;
    let mut trace = Vec::with_capacity(config.epochs + 1);

    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        // Trace entry e is the mean of per-query losses as each batch saw
        // them during epoch e, before that batch's update.
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; params.weights().len()];
            for &qi in batch {
                let p = &prepared[qi];
                let (loss, g) = window_loss_and_grad(
                    &params,
                    &p.query_features,
                    &p.doc_features,
                    &p.target,
                    config.temperature,
                )?;
                epoch_loss += loss;
                for (acc, value) in grad.iter_mut().zip(&g) {
                    *acc += value;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let lr = if step < warmup_steps {
                config.learning_rate * (step + 1) as f64 / warmup_steps as f64
            } else {
                config.learning_rate
            };
            for (w, g) in params.weights_mut().iter_mut().zip(&grad) {
                *w -= lr * scale * g;
            }
            step += 1;
            if !params.is_finite() {
                return Err(UtilityError::DivergedLoss { epoch });
            }
        }
        let mean = epoch_loss / prepared.len() as f64;
        if !mean.is_finite() {
            return Err(UtilityError::DivergedLoss { epoch });
        }
        trace.push((epoch, mean));
    }
    // Final entry: mean loss of the trained parameters.
    let mut final_loss = 0.0;
    for p in &prepared {
        let (loss, _) = window_loss_and_grad(
            &params,
            &p.query_features,
            &p.doc_features,
            &p.target,
            config.temperature,
        )?;
        final_loss += loss;
    }
    final_loss /= prepared.len() as f64;
    if !final_loss.is_finite() {
        return Err(UtilityError::DivergedLoss {
            epoch: config.epochs,
        });
    }
    trace.push((config.epochs, final_loss));
    Ok(TrainOutcome {
        params,
        loss_trace: trace,
    })
}
