//! End-to-end QA evaluation on the toy collection, with ablations.
//!
//! Trains the utility encoder, then scores the full pipeline against two
//! reduced variants: similarity-only retrieval (no fusion) and raw
//! documents instead of summaries.
//!
//! Run: `cargo run --example evaluate_qa`

use metrag::evalgen::{evaluate, EvalOptions, KnowledgeKind};
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

    let base = EvalOptions {
        knowledge: KnowledgeKind::Summary,
        summarize_max_chars: 160,
        use_fusion: true,
        seed: 0,
        config_fingerprint: String::new(),
    };
    let raw_docs = EvalOptions {
        knowledge: KnowledgeKind::RawDocs,
        ..base.clone()
    };
    let no_fusion = EvalOptions {
        use_fusion: false,
        ..base.clone()
    };

    println!("\n{:<24} {:>6} {:>6}", "variant", "EM", "F1");
    for (name, opts) in [
        ("full pipeline", &base),
        ("without summarization", &raw_docs),
        ("without fusion", &no_fusion),
    ] {
        let result = evaluate(&queries, &pipeline, &oracle, opts).unwrap();
        println!(
            "{:<24} {:>6.1} {:>6.1}",
            name,
            result.em_mean * 100.0,
            result.f1_mean * 100.0
        );
    }
}
