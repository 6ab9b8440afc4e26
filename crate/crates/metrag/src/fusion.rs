//! Reunion of similarity- and utility-oriented rankings.
//!
//! A document is admitted when its similarity score reaches the k_R-th
//! largest similarity score or its utility score reaches the k_U-th largest
//! utility score - a rank-threshold union, not a score mix. Threshold
//! comparisons use `>=`, so ties at the cut admit every tied document and
//! the admitted set may exceed `k_R + k_U`. The default split of a total
//! budget is `k_R = k_U = floor(k/2)`.
//!
//! The empty-string sentinel must be resolved by selective retrieval before
//! fusion; it never participates here.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retriever::ScoredDoc;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("k = {k} exceeds list length {len}")]
    KExceedsListLength { k: usize, len: usize },
    #[error("similarity and utility lists cover different candidate pools")]
    CandidatePoolMismatch,
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FusionConfig {
    pub k_sim: usize,
    pub k_util: usize,
}

impl FusionConfig {
    pub fn new(k_sim: usize, k_util: usize) -> Result<Self, FusionError> {
        if k_sim + k_util == 0 {
            return Err(FusionError::InvalidConfig(
                "k_sim + k_util must be at least 1".to_string(),
            ));
        }
        Ok(Self { k_sim, k_util })
    }

    /// Split a total document budget evenly: `floor(k/2)` per channel.
    pub fn from_total(total_k: usize) -> Result<Self, FusionError> {
        let half = total_k / 2;
        if half == 0 {
            return Err(FusionError::InvalidConfig(format!(
                "total_k {total_k} is too small for the floor(k/2) split"
            )));
        }
        Self::new(half, half)
    }

    /// Upper bound on admitted documents when scores are distinct.
    #[must_use]
    pub fn budget(&self) -> usize {
        self.k_sim + self.k_util
    }
}

/// Which channel admitted a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmitFlag {
    BySimilarity,
    ByUtility,
    Both,
}

/// The fused document set, ordered utility-admitted first (descending
/// utility score), then similarity-only (descending similarity score).
#[derive(Debug, Clone)]
pub struct AdmittedSet {
    pub doc_ids: Vec<String>,
    pub admit_flags: BTreeMap<String, AdmitFlag>,
}

impl AdmittedSet {
    #[must_use]
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    #[must_use]
    pub fn contains(&self, doc_id: &str) -> bool {
        self.admit_flags.contains_key(doc_id)
    }
}

/// The k-th largest score (1-based). `k = 0` yields the +infinity sentinel,
/// which admits nothing through that channel.
pub fn thresholds(scored: &[ScoredDoc], k: usize) -> Result<f64, FusionError> {
    if k == 0 {
        return Ok(f64::INFINITY);
    }
    if k > scored.len() {
        return Err(FusionError::KExceedsListLength {
            k,
            len: scored.len(),
        });
    }
    let mut values: Vec<f64> = scored.iter().map(|s| s.score).collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(values[k - 1])
}

/// Admit every document whose similarity clears the similarity threshold or
/// whose utility clears the utility threshold.
pub fn fuse(
    sim_scored: &[ScoredDoc],
    util_scored: &[ScoredDoc],
    config: &FusionConfig,
) -> Result<AdmittedSet, FusionError> {
    let mut sim_ids: Vec<&str> = sim_scored.iter().map(|s| s.doc_id.as_str()).collect();
    let mut util_ids: Vec<&str> = util_scored.iter().map(|s| s.doc_id.as_str()).collect();
    sim_ids.sort_unstable();
    util_ids.sort_unstable();
    if sim_ids != util_ids {
        return Err(FusionError::CandidatePoolMismatch);
    }

    let k_sim = config.k_sim.min(sim_scored.len());
    let k_util = config.k_util.min(util_scored.len());
    let sim_cut = thresholds(sim_scored, k_sim)?;
    let util_cut = thresholds(util_scored, k_util)?;

    let util_by_id: BTreeMap<&str, f64> = util_scored
        .iter()
        .map(|s| (s.doc_id.as_str(), s.score))
        .collect();

    let mut admit_flags = BTreeMap::new();
    let mut by_utility: Vec<(&str, f64)> = Vec::new();
    let mut by_similarity_only: Vec<(&str, f64)> = Vec::new();
    for sim in sim_scored {
        let util_score = util_by_id[sim.doc_id.as_str()];
        let sim_hit = sim.score >= sim_cut;
        let util_hit = util_score >= util_cut;
        let flag = match (sim_hit, util_hit) {
            (true, true) => AdmitFlag::Both,
            (true, false) => AdmitFlag::BySimilarity,
            (false, true) => AdmitFlag::ByUtility,
            (false, false) => continue,
        };
        admit_flags.insert(sim.doc_id.clone(), flag);
        if util_hit {
            by_utility.push((sim.doc_id.as_str(), util_score));
        } else {
            by_similarity_only.push((sim.doc_id.as_str(), sim.score));
        }
    }
    let desc = |a: &(&str, f64), b: &(&str, f64)| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.0.cmp(b.0))
    };
    by_utility.sort_by(desc);
    by_similarity_only.sort_by(desc);
    let doc_ids = by_utility
        .into_iter()
        .chain(by_similarity_only)
        .map(|(id, _)| id.to_string())
        .collect();
    Ok(AdmittedSet {
        doc_ids,
        admit_flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retriever::ScoreSource;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn sim(id: &str, score: f64) -> ScoredDoc {
        ScoredDoc {
            doc_id: id.to_string(),
            score,
            source: ScoreSource::Similarity,
        }
    }

    fn util(id: &str, score: f64) -> ScoredDoc {
        ScoredDoc {
            doc_id: id.to_string(),
            score,
            source: ScoreSource::Utility,
        }
    }

    /// Literal evaluation of the admission rule, used as the test oracle:
    /// a document passes iff its similarity is at least the k_R-th largest
    /// similarity or its utility is at least the k_U-th largest utility.
    fn brute_force_admitted(
        sim_scored: &[ScoredDoc],
        util_scored: &[ScoredDoc],
        k_sim: usize,
        k_util: usize,
    ) -> BTreeSet<String> {
        let nth = |scores: &[ScoredDoc], k: usize| -> f64 {
            if k == 0 || k > scores.len() {
                return f64::INFINITY;
            }
            let mut v: Vec<f64> = scores.iter().map(|s| s.score).collect();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v[k - 1]
        };
        let sim_cut = nth(sim_scored, k_sim.min(sim_scored.len()));
        let util_cut = nth(util_scored, k_util.min(util_scored.len()));
        sim_scored
            .iter()
            .filter_map(|s| {
                let u = util_scored.iter().find(|x| x.doc_id == s.doc_id).unwrap();
                if s.score >= sim_cut || u.score >= util_cut {
                    Some(s.doc_id.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    #[test]
    fn thresholds_order_statistics() {
        let scores = vec![sim("a", 0.9), sim("b", 0.7), sim("c", 0.5)];
        assert_eq!(thresholds(&scores, 2).unwrap(), 0.7);
        assert_eq!(thresholds(&scores, 0).unwrap(), f64::INFINITY);
        let dup = vec![sim("a", 0.9), sim("b", 0.9), sim("c", 0.5)];
        assert_eq!(thresholds(&dup, 2).unwrap(), 0.9);
        assert!(matches!(
            thresholds(&scores, 4),
            Err(FusionError::KExceedsListLength { .. })
        ));
    }

    #[test]
    fn single_channel_admits_its_top_doc() {
        let sim_scores = vec![sim("a", 0.9), sim("b", 0.5)];
        let util_scores = vec![util("a", 0.1), util("b", 0.8)];
        let only_sim = fuse(&sim_scores, &util_scores, &FusionConfig { k_sim: 1, k_util: 0 }).unwrap();
        assert_eq!(only_sim.doc_ids, vec!["a"]);
        assert_eq!(only_sim.admit_flags["a"], AdmitFlag::BySimilarity);
        let only_util = fuse(&sim_scores, &util_scores, &FusionConfig { k_sim: 0, k_util: 1 }).unwrap();
        assert_eq!(only_util.doc_ids, vec!["b"]);
        assert_eq!(only_util.admit_flags["b"], AdmitFlag::ByUtility);
    }

    #[test]
    fn crossed_rankings_admit_the_union() {
        // sim ranks a>b>c>d>e, util ranks c>e>a>b>d, both channels keep 2.
        let sim_scores = vec![
            sim("a", 0.9),
            sim("b", 0.8),
            sim("c", 0.7),
            sim("d", 0.6),
            sim("e", 0.5),
        ];
        let util_scores = vec![
            util("a", 0.6),
            util("b", 0.5),
            util("c", 0.9),
            util("d", 0.4),
            util("e", 0.8),
        ];
        let config = FusionConfig { k_sim: 2, k_util: 2 };
        let admitted = fuse(&sim_scores, &util_scores, &config).unwrap();
        let ids: BTreeSet<_> = admitted.doc_ids.iter().cloned().collect();
        assert_eq!(ids, ["a", "b", "c", "e"].iter().map(|s| s.to_string()).collect());
        assert_eq!(admitted.admit_flags["c"], AdmitFlag::ByUtility);
        assert_eq!(admitted.admit_flags["e"], AdmitFlag::ByUtility);
        assert_eq!(admitted.admit_flags["a"], AdmitFlag::BySimilarity);
        assert_eq!(admitted.admit_flags["b"], AdmitFlag::BySimilarity);
        // Utility-admitted first by descending utility, then similarity-only.
        assert_eq!(admitted.doc_ids, vec!["c", "e", "a", "b"]);
    }

    #[test]
    fn identical_rankings_collapse_to_overlap() {
        let sim_scores = vec![sim("a", 0.9), sim("b", 0.8), sim("c", 0.7)];
        let util_scores = vec![util("a", 0.9), util("b", 0.8), util("c", 0.7)];
        let admitted = fuse(&sim_scores, &util_scores, &FusionConfig { k_sim: 2, k_util: 2 }).unwrap();
        assert_eq!(admitted.len(), 2);
        assert!(admitted.admit_flags.values().all(|f| *f == AdmitFlag::Both));
    }

    #[test]
    fn threshold_ties_admit_all_tied_docs() {
        let sim_scores = vec![sim("a", 0.9), sim("b", 0.9), sim("c", 0.9)];
        let util_scores = vec![util("a", 0.1), util("b", 0.2), util("c", 0.3)];
        let admitted = fuse(&sim_scores, &util_scores, &FusionConfig { k_sim: 1, k_util: 0 }).unwrap();
        assert_eq!(admitted.len(), 3, "all docs tie at the similarity cut");
    }

    #[test]
    fn mismatched_pools_are_rejected() {
        let sim_scores = vec![sim("a", 0.9), sim("b", 0.8)];
        let util_scores = vec![util("a", 0.9), util("c", 0.8)];
        assert!(matches!(
            fuse(&sim_scores, &util_scores, &FusionConfig { k_sim: 1, k_util: 1 }),
            Err(FusionError::CandidatePoolMismatch)
        ));
    }

    #[test]
    fn default_split_halves_the_budget() {
        let config = FusionConfig::from_total(5).unwrap();
        assert_eq!((config.k_sim, config.k_util), (2, 2));
        assert!(FusionConfig::from_total(1).is_err());
    }

    proptest! {
        #[test]
        fn fuse_equals_brute_force_union(
            pool_size in 1usize..20,
            k_sim in 0usize..=5,
            k_util in 0usize..=5,
            seed in 0u64..1000,
        ) {
            prop_assume!(k_sim + k_util >= 1);
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let sim_scores: Vec<ScoredDoc> = (0..pool_size)
                .map(|i| sim(&format!("d{i:02}"), rng.random_range(-1.0..1.0)))
                .collect();
            let util_scores: Vec<ScoredDoc> = (0..pool_size)
                .map(|i| util(&format!("d{i:02}"), rng.random_range(-1.0..1.0)))
                .collect();
            let config = FusionConfig { k_sim, k_util };
            let admitted = fuse(&sim_scores, &util_scores, &config).unwrap();
            let expected = brute_force_admitted(&sim_scores, &util_scores, k_sim, k_util);
            let actual: BTreeSet<String> = admitted.doc_ids.iter().cloned().collect();
            prop_assert_eq!(actual, expected);
            prop_assert_eq!(admitted.doc_ids.len(), admitted.admit_flags.len());

            // Size bounds hold when scores are distinct (they are, almost
            // surely, with continuous draws).
            let ks = k_sim.min(pool_size);
            let ku = k_util.min(pool_size);
            prop_assert!(admitted.len() <= ks + ku);
            prop_assert!(admitted.len() >= ks.max(ku));
        }

        #[test]
        fn fuse_is_invariant_under_monotone_transforms(
            pool_size in 2usize..15,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let sim_scores: Vec<ScoredDoc> = (0..pool_size)
                .map(|i| sim(&format!("d{i:02}"), rng.random_range(-1.0..1.0)))
                .collect();
            let util_scores: Vec<ScoredDoc> = (0..pool_size)
                .map(|i| util(&format!("d{i:02}"), rng.random_range(-1.0..1.0)))
                .collect();
            // Strictly monotone: x -> exp(2x) + x.
            let warp = |s: &ScoredDoc| ScoredDoc {
                doc_id: s.doc_id.clone(),
                score: (2.0 * s.score).exp() + s.score,
                source: s.source,
            };
            let sim_warped: Vec<ScoredDoc> = sim_scores.iter().map(warp).collect();
            let util_warped: Vec<ScoredDoc> = util_scores.iter().map(warp).collect();
            let config = FusionConfig { k_sim: 2, k_util: 2 };
            let plain = fuse(&sim_scores, &util_scores, &config).unwrap();
            let warped = fuse(&sim_warped, &util_warped, &config).unwrap();
            prop_assert_eq!(plain.doc_ids, warped.doc_ids);
        }
    }
}
