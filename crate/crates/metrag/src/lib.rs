//! Desk-scale retrieval-augmented QA engine.
//!
//! The pipeline has three stages. First, a similarity retriever scores
//! documents by embedding cosine and a utility model - the same encoder
//! architecture, trained against an LLM-derived utility distribution via KL
//! distillation - rescores them; a rank-threshold fusion admits documents
//! that make the top-k of either ranking. Second, the admitted documents are
//! compressed by a query-focused extractive summarizer, whose training
//! corpora and alignment losses (reward BCE over implicit policy rewards)
//! are built here. Third, an answer is generated over the distilled
//! knowledge and graded with containment exact-match and token F1.
//!
//! All LLM interaction goes through the pluggable [`oracle::Oracle`] trait:
//! a deterministic mock for offline tests and a remote completion-endpoint
//! client with on-disk response caching.

pub mod artifact;
pub mod cli;
pub mod evalgen;
pub mod fusion;
pub mod oracle;
pub mod pipeline;
pub mod retriever;
pub mod summarizer;
pub mod textcore;
pub mod toy;
pub mod utility;
