//! Reunite similarity- and utility-oriented rankings into one admitted set.
//!
//! Run: `cargo run --example fuse_rankings`

use metrag::fusion::{fuse, thresholds, AdmitFlag, FusionConfig};
use metrag::retriever::{ScoreSource, ScoredDoc};

fn scored(id: &str, score: f64, source: ScoreSource) -> ScoredDoc {
    ScoredDoc {
        doc_id: id.to_string(),
        score,
        source,
    }
}

fn main() {
    // Two disagreeing rankings over the same five candidates.
    let sim = vec![
        scored("a", 0.90, ScoreSource::Similarity),
        scored("b", 0.80, ScoreSource::Similarity),
        scored("c", 0.70, ScoreSource::Similarity),
        scored("d", 0.60, ScoreSource::Similarity),
        scored("e", 0.50, ScoreSource::Similarity),
    ];
    let util = vec![
        scored("a", 0.60, ScoreSource::Utility),
        scored("b", 0.50, ScoreSource::Utility),
        scored("c", 0.90, ScoreSource::Utility),
        scored("d", 0.40, ScoreSource::Utility),
        scored("e", 0.80, ScoreSource::Utility),
    ];

    let config = FusionConfig { k_sim: 2, k_util: 2 };
    println!(
        "similarity cut (k={}):  {:.2}",
        config.k_sim,
        thresholds(&sim, config.k_sim).unwrap()
    );
    println!(
        "utility cut    (k={}):  {:.2}",
        config.k_util,
        thresholds(&util, config.k_util).unwrap()
    );

    let admitted = fuse(&sim, &util, &config).unwrap();
    println!("\nadmitted ({} documents):", admitted.len());
    for id in &admitted.doc_ids {
        let via = match admitted.admit_flags[id] {
            AdmitFlag::BySimilarity => "similarity only",
            AdmitFlag::ByUtility => "utility only",
            AdmitFlag::Both => "both rankings",
        };
        println!("  {id}  via {via}");
    }
    println!(
        "\nnote: a document clears the gate when it reaches the top-k of either\n\
         ranking, so the admitted set is the union of both top-k lists."
    );
}
