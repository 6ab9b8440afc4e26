//! Text preprocessing and the trainable linear encoder.
//!
//! The encoder pipeline is `tokenize -> featurize -> encode`: text is split
//! into lowercase alphanumeric tokens, hashed (FNV-1a 64, unigrams plus
//! adjacent bigrams) into a sparse L2-normalized count vector, then mapped
//! through a dense linear layer and L2-normalized again. Similarity between
//! two embeddings is cosine. `encoder_backward` provides the exact analytic
//! gradient of a weighted sum of cosine scores with respect to the encoder
//! weights, which is what the utility training loop consumes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

/// FNV-1a 64-bit offset basis.
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
/// FNV-1a 64-bit prime.
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Identifier recorded in encoder artifacts for the feature hash in use.
pub const HASH_ID_FNV1A64: u32 = 1;

const ARTIFACT_MAGIC: &[u8; 8] = b"MRGENC1\0";
const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TextcoreError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("encoder artifact io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad encoder artifact: {0}")]
    BadArtifact(String),
}

/// FNV-1a 64-bit hash. Fixed constants keep feature buckets identical
/// across runs and platforms.
#[must_use]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Lowercase and split on every non-alphanumeric character, dropping empty
/// pieces. `"George RR Martin"` becomes `["george", "rr", "martin"]`.
#[must_use]
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Sparse hashed feature vector, entries sorted by index. Unit L2 norm for
/// non-empty input, the zero vector for empty input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    /// Zero vector of the given dimension.
    #[must_use]
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[must_use]
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    #[must_use]
    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, w)| w * w)
            .sum::<f64>()
            .sqrt()
    }
}

/// Hash unigrams and adjacent bigrams into a count vector of width `dim`,
/// then L2-normalize. Bigram keys join the two tokens with `_`, so
/// `["a", "b"]` contributes features `a`, `b` and `a_b`.
#[must_use]
pub fn featurize(tokens: &[String], dim: usize) -> FeatureVector {
    debug_assert!(dim >= 2, "feature dim must be at least 2");
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut bump = |key: &str| {
        let bucket = (fnv1a64(key.as_bytes()) % dim as u64) as usize;
        *counts.entry(bucket).or_insert(0.0) += 1.0;
    };
    for token in tokens {
        bump(token);
    }
    for pair in tokens.windows(2) {
        bump(&format!("{}_{}", pair[0], pair[1]));
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    let entries = counts
        .into_iter()
        .map(|(i, c)| (i, if norm > 0.0 { c / norm } else { c }))
        .collect();
    FeatureVector { dim, entries }
}

/// Dense embedding produced by [`encode`]. Unit L2 norm for any non-zero
/// input, exactly zero for empty input.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    #[must_use]
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[must_use]
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Weights of the linear encoder, stored dense row-major with `out_dim`
/// rows of `in_dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
}

impl EncoderParams {
    /// Build from an explicit weight matrix. Panics if the buffer size does
    /// not match `out_dim * in_dim`.
    #[must_use]
    pub fn from_weights(in_dim: usize, out_dim: usize, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), in_dim * out_dim, "weight buffer size mismatch");
        Self {
            in_dim,
            out_dim,
            weights,
        }
    }

    /// Square identity map: the embedding is the hashed feature vector
    /// itself, so cosine reduces to plain token-overlap similarity.
    #[must_use]
    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self {
            in_dim: dim,
            out_dim: dim,
            weights,
        }
    }

    #[must_use]
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
        }
    }

    /// Seeded uniform init in [-1/sqrt(out_dim), 1/sqrt(out_dim)].
    #[must_use]
    pub fn random(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let scale = 1.0 / (out_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
        }
    }

    #[must_use]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[must_use]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[must_use]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[must_use]
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    /// Canonical byte serialization: header
    /// `{magic, format_version, in_dim, out_dim, hash_id}` followed by the
    /// weights as little-endian f64. Round-trips bit-exactly.
    #[must_use]
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 + 8 + 8 + 4 + self.weights.len() * 8);
        out.extend_from_slice(ARTIFACT_MAGIC);
        out.extend_from_slice(&ARTIFACT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.in_dim as u64).to_le_bytes());
        out.extend_from_slice(&(self.out_dim as u64).to_le_bytes());
        out.extend_from_slice(&HASH_ID_FNV1A64.to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TextcoreError> {
        let bad = |msg: &str| TextcoreError::BadArtifact(msg.to_string());
        if bytes.len() < 32 {
            return Err(bad("truncated header"));
        }
        if &bytes[0..8] != ARTIFACT_MAGIC {
            return Err(bad("wrong magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != ARTIFACT_VERSION {
            return Err(TextcoreError::BadArtifact(format!(
                "unsupported format_version {version}"
            )));
        }
        let in_dim = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let out_dim = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
        let hash_id = u32::from_le_bytes(bytes[28..32].try_into().unwrap());
        if hash_id != HASH_ID_FNV1A64 {
            return Err(TextcoreError::BadArtifact(format!(
                "unknown hash_id {hash_id}"
            )));
        }
        let expected = in_dim
            .checked_mul(out_dim)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| bad("dimension overflow"))?;
        let payload = &bytes[32..];
        if payload.len() != expected {
            return Err(bad("weight payload size mismatch"));
        }
        let weights = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            in_dim,
            out_dim,
            weights,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TextcoreError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TextcoreError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// FNV-1a fingerprint of the canonical serialization, hex-encoded.
    #[must_use]
    pub fn fingerprint(&self) -> String {
        format!("{:016x}", fnv1a64(&self.to_bytes()))
    }
}

/// Apply the linear map and L2-normalize: `v = Wx / |Wx|`. Empty input
/// encodes to the zero vector.
pub fn encode(
    params: &EncoderParams,
    features: &FeatureVector,
) -> Result<EmbeddingVector, TextcoreError> {
    if features.dim() != params.in_dim {
        return Err(TextcoreError::DimensionMismatch {
            expected: params.in_dim,
            actual: features.dim(),
        });
    }
    let mut values = vec![0.0; params.out_dim];
    for &(col, weight) in features.entries() {
        for (row, value) in values.iter_mut().enumerate() {
            *value += weight * params.weights[row * params.in_dim + col];
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    Ok(EmbeddingVector { values })
}

/// Cosine similarity. Returns 0 when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, TextcoreError> {
    if a.len() != b.len() {
        return Err(TextcoreError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let norm_a = a.l2_norm();
    let norm_b = b.l2_norm();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (norm_a * norm_b))
}

/// Exact gradient of `L = sum_i g_i * score_i` with respect to the shared
/// encoder weights, where `score_i = cosine(encode(W, q), encode(W, x_i))`.
///
/// With `a = Wq`, `b_i = Wx_i`, `u = a/|a|`, `v_i = b_i/|b_i|` the chain
/// rule through the normalization gives
/// `ds_i/da = (v_i - s_i u)/|a|` and `ds_i/db_i = (u - s_i v_i)/|b_i|`,
/// and each contributes the outer product with its sparse input. Inputs or
/// queries with zero norm score a constant 0 and contribute no gradient.
pub fn encoder_backward(
    params: &EncoderParams,
    inputs: &[FeatureVector],
    grad_wrt_scores: &[f64],
    query_features: &FeatureVector,
) -> Result<Vec<f64>, TextcoreError> {
    if inputs.len() != grad_wrt_scores.len() {
        return Err(TextcoreError::DimensionMismatch {
            expected: inputs.len(),
            actual: grad_wrt_scores.len(),
        });
    }
    let in_dim = params.in_dim;
    let out_dim = params.out_dim;
    let mut grad = vec![0.0; in_dim * out_dim];

    // Pre-normalization query embedding a = Wq and its norm.
    if query_features.dim() != in_dim {
        return Err(TextcoreError::DimensionMismatch {
            expected: in_dim,
            actual: query_features.dim(),
        });
    }
    let mut a = vec![0.0; out_dim];
    for &(col, weight) in query_features.entries() {
        for (row, value) in a.iter_mut().enumerate() {
            *value += weight * params.weights[row * in_dim + col];
        }
    }
    let norm_a = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_a == 0.0 {
        // Every score is the constant 0; nothing flows back.
        return Ok(grad);
    }
    let u: Vec<f64> = a.iter().map(|v| v / norm_a).collect();

    for (features, &g) in inputs.iter().zip(grad_wrt_scores) {
        if features.dim() != in_dim {
            return Err(TextcoreError::DimensionMismatch {
                expected: in_dim,
                actual: features.dim(),
            });
        }
        if g == 0.0 {
            continue;
        }
        let mut b = vec![0.0; out_dim];
        for &(col, weight) in features.entries() {
            for (row, value) in b.iter_mut().enumerate() {
                *value += weight * params.weights[row * in_dim + col];
            }
        }
        let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_b == 0.0 {
            continue;
        }
        let v: Vec<f64> = b.iter().map(|x| x / norm_b).collect();
        let score: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();

        // Query-side term: g * (v - s*u)/|a| outer q.
        for row in 0..out_dim {
            let coeff = g * (v[row] - score * u[row]) / norm_a;
            if coeff == 0.0 {
                continue;
            }
            for &(col, weight) in query_features.entries() {
                grad[row * in_dim + col] += coeff * weight;
            }
        }
        // Document-side term: g * (u - s*v)/|b| outer x_i.
        for row in 0..out_dim {
            let coeff = g * (u[row] - score * v[row]) / norm_b;
            if coeff == 0.0 {
                continue;
            }
            for &(col, weight) in features.entries() {
                grad[row * in_dim + col] += coeff * weight;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_and_lowercases() {
        assert_eq!(tokenize("George RR Martin"), vec!["george", "rr", "martin"]);
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(
            tokenize("A Song of Ice-and-Fire!"),
            vec!["a", "song", "of", "ice", "and", "fire"]
        );
    }

    #[test]
    fn fnv1a64_matches_reference_vector() {
        // Standard FNV-1a 64 test vector.
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b""), FNV_OFFSET);
    }

    #[test]
    fn featurize_empty_is_zero_vector() {
        let fv = featurize(&[], 256);
        assert!(fv.is_empty());
        assert_eq!(fv.l2_norm(), 0.0);
    }

    #[test]
    fn featurize_single_token_has_unit_weight() {
        let fv = featurize(&["a".to_string()], 256);
        assert_eq!(fv.entries().len(), 1);
        assert!((fv.entries()[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn featurize_counts_unigrams_and_bigram() {
        // "a", "b" and "a_b" hash to distinct buckets at dim 4096.
        let fv = featurize(&["a".to_string(), "b".to_string()], 4096);
        assert_eq!(fv.entries().len(), 3);
        let expected = 1.0 / 3f64.sqrt();
        for &(_, w) in fv.entries() {
            assert!((w - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn featurize_is_deterministic() {
        let tokens = tokenize("A Song of Ice and Fire by George RR Martin");
        let a = featurize(&tokens, 4096);
        let b = featurize(&tokens, 4096);
        assert_eq!(a, b);
    }

    #[test]
    fn encode_identity_passes_through() {
        let params = EncoderParams::identity(2);
        let fv = FeatureVector {
            dim: 2,
            entries: vec![(0, 1.0)],
        };
        let emb = encode(&params, &fv).unwrap();
        assert_eq!(emb.values(), &[1.0, 0.0]);
    }

    #[test]
    fn encode_normalizes_output() {
        let params = EncoderParams::identity(2);
        let fv = FeatureVector {
            dim: 2,
            entries: vec![(0, 3.0), (1, 4.0)],
        };
        let emb = encode(&params, &fv).unwrap();
        assert!((emb.values()[0] - 0.6).abs() < 1e-12);
        assert!((emb.values()[1] - 0.8).abs() < 1e-12);
        assert!((emb.l2_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn encode_zero_params_gives_zero_vector() {
        let params = EncoderParams::zeros(4, 3);
        let fv = featurize(&tokenize("some words"), 4);
        let emb = encode(&params, &fv).unwrap();
        assert!(emb.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_rejects_dimension_mismatch() {
        let params = EncoderParams::identity(4);
        let fv = featurize(&tokenize("x"), 8);
        assert!(matches!(
            encode(&params, &fv),
            Err(TextcoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_basic_cases() {
        let e = |v: Vec<f64>| EmbeddingVector::from_values(v);
        assert_eq!(cosine(&e(vec![1.0, 0.0]), &e(vec![1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine(&e(vec![1.0, 0.0]), &e(vec![0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&e(vec![1.0, 0.0]), &e(vec![1.0, 1.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert_eq!(cosine(&e(vec![0.0, 0.0]), &e(vec![1.0, 1.0])).unwrap(), 0.0);
        assert!(matches!(
            cosine(&e(vec![1.0]), &e(vec![1.0, 0.0])),
            Err(TextcoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_is_symmetric() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let a = EmbeddingVector::from_values((0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
            let b = EmbeddingVector::from_values((0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
            assert_eq!(cosine(&a, &b).unwrap(), cosine(&b, &a).unwrap());
        }
    }

    #[test]
    fn unit_norm_for_nonzero_inputs() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let params = EncoderParams::random(16, 8, rng.random());
            let text: String = (0..rng.random_range(1..8))
                .map(|_| format!("w{} ", rng.random_range(0..30u32)))
                .collect();
            let fv = featurize(&tokenize(&text), 16);
            let emb = encode(&params, &fv).unwrap();
            if emb.l2_norm() > 0.0 {
                assert!((emb.l2_norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn backward_zero_upstream_gradient_is_zero() {
        let params = EncoderParams::random(8, 4, 3);
        let q = featurize(&tokenize("alpha beta"), 8);
        let docs = vec![featurize(&tokenize("gamma delta"), 8)];
        let grad = encoder_backward(&params, &docs, &[0.0], &q).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_self_similarity_gradient_is_zero() {
        // cosine of a vector with itself sits at its maximum.
        let params = EncoderParams::identity(8);
        let q = featurize(&tokenize("alpha beta"), 8);
        let grad = encoder_backward(&params, std::slice::from_ref(&q), &[1.0], &q).unwrap();
        let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-12, "norm was {norm}");
    }

    /// Forward score used by the finite-difference oracle; independent of
    /// the backward implementation.
    fn forward_scores(params: &EncoderParams, docs: &[FeatureVector], q: &FeatureVector) -> Vec<f64> {
        let qe = encode(params, q).unwrap();
        docs.iter()
            .map(|d| cosine(&qe, &encode(params, d).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn backward_matches_central_finite_differences() {
        let mut rng = StdRng::seed_from_u64(2024);
        let h = 1e-5;
        for trial in 0..100 {
            let in_dim = rng.random_range(4..=16);
            let out_dim = rng.random_range(2..=8);
            let n_docs = rng.random_range(1..=5);
            let params = EncoderParams::random(in_dim, out_dim, rng.random());
            let rand_text = |rng: &mut StdRng| -> String {
                (0..rng.random_range(1..6))
                    .map(|_| format!("t{} ", rng.random_range(0..40u32)))
                    .collect()
            };
            let q = featurize(&tokenize(&rand_text(&mut rng)), in_dim);
            if q.is_empty() {
                continue;
            }
            let docs: Vec<FeatureVector> = (0..n_docs)
                .map(|_| featurize(&tokenize(&rand_text(&mut rng)), in_dim))
                .collect();
            let upstream: Vec<f64> = (0..n_docs).map(|_| rng.random_range(-2.0..2.0)).collect();

            let analytic = encoder_backward(&params, &docs, &upstream, &q).unwrap();

            let loss = |p: &EncoderParams| -> f64 {
                forward_scores(p, &docs, &q)
                    .iter()
                    .zip(&upstream)
                    .map(|(s, g)| s * g)
                    .sum()
            };
            let mut fd = vec![0.0; analytic.len()];
            let mut perturbed = params.clone();
            for (i, slot) in fd.iter_mut().enumerate() {
                let orig = perturbed.weights()[i];
                perturbed.weights_mut()[i] = orig + h;
                let plus = loss(&perturbed);
                perturbed.weights_mut()[i] = orig - h;
                let minus = loss(&perturbed);
                perturbed.weights_mut()[i] = orig;
                *slot = (plus - minus) / (2.0 * h);
            }

            let diff: f64 = analytic
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let fd_norm: f64 = fd.iter().map(|g| g * g).sum::<f64>().sqrt();
            if fd_norm < 1e-9 {
                assert!(diff < 1e-9, "trial {trial}: both gradients should vanish");
            } else {
                assert!(
                    diff / fd_norm < 1e-5,
                    "trial {trial}: relative error {} too large",
                    diff / fd_norm
                );
            }
        }
    }

    #[test]
    fn params_roundtrip_is_bit_exact() {
        let params = EncoderParams::random(16, 8, 99);
        let bytes = params.to_bytes();
        let restored = EncoderParams::from_bytes(&bytes).unwrap();
        assert_eq!(params, restored);
        assert_eq!(bytes, restored.to_bytes());
    }

    #[test]
    fn params_rejects_corrupt_artifacts() {
        let params = EncoderParams::identity(4);
        let mut bytes = params.to_bytes();
        bytes[0] = b'X';
        assert!(EncoderParams::from_bytes(&bytes).is_err());
        let short = &params.to_bytes()[..16];
        assert!(EncoderParams::from_bytes(short).is_err());
        let mut truncated = params.to_bytes();
        truncated.pop();
        assert!(EncoderParams::from_bytes(&truncated).is_err());
    }
}
