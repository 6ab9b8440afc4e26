//! Skip retrieval when the trained utility model ranks the empty string
//! above every document.
//!
//! Four of the twenty toy questions are answerable from the oracle's own
//! knowledge and no corpus document helps with them. After training, the
//! empty-string sentinel outranks every document exactly for those four,
//! and the pipeline answers them without any retrieved context.
//!
//! Run: `cargo run --example selective_retrieval`

use metrag::fusion::FusionConfig;
use metrag::pipeline::Pipeline;
use metrag::retriever::build_index;
use metrag::textcore::EncoderParams;
use metrag::toy;
use metrag::utility::{train_utility, UtilityTrainConfig};

fn main() {
    let corpus = toy::corpus();
    let queries = toy::queries();
    let oracle = toy::mock_oracle_for(&queries);
    let sim_params = EncoderParams::identity(512);
    let index = build_index(&corpus, &sim_params).expect("corpus indexes");

    let config = UtilityTrainConfig {
        window_size: 10,
        epochs: 150,
        seed: 42,
        ..UtilityTrainConfig::default()
    };
    println!("training utility encoder ({} epochs)...", config.epochs);
    let outcome =
        train_utility(&config, &queries, &index, &sim_params, &oracle).expect("training converges");

    let pipeline = Pipeline::new(
        &corpus,
        &sim_params,
        &outcome.params,
        FusionConfig::from_total(5).unwrap(),
        5,
        10,
    )
    .unwrap();

    let mut fired = 0usize;
    for query in &queries {
        let stage = pipeline.admit(&query.text).unwrap();
        if stage.selective_fired {
            fired += 1;
            let best_doc = stage
                .util_scored
                .iter()
                .filter(|s| s.doc_id != "__ES__")
                .map(|s| s.score)
                .fold(f64::NEG_INFINITY, f64::max);
            println!(
                "skip retrieval  {}  (best document utility {:+.3} < sentinel 0)",
                query.text, best_doc
            );
        }
    }
    println!(
        "\n{fired} of {} queries answered without retrieval ({:.0}%)",
        queries.len(),
        100.0 * fired as f64 / queries.len() as f64
    );
}
