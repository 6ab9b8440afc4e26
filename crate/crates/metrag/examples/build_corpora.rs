//! Build the summarizer training corpora: instruction-summary pairs from a
//! teacher oracle and prompt/response/correctness triples from end-task
//! feedback.
//!
//! Run: `cargo run --example build_corpora`

use metrag::fusion::FusionConfig;
use metrag::pipeline::Pipeline;
use metrag::summarizer::{build_alignment_corpus, build_distillation_corpus};
use metrag::textcore::EncoderParams;
use metrag::toy;

fn main() {
    let corpus = toy::corpus();
    let queries = toy::queries();
    let oracle = toy::mock_oracle_for(&queries);
    let sim_params = EncoderParams::identity(512);

    // An untrained pipeline is enough to demonstrate the corpus builders.
    let pipeline = Pipeline::new(
        &corpus,
        &sim_params,
        &sim_params,
        FusionConfig::from_total(5).unwrap(),
        5,
        10,
    )
    .unwrap();

    let pairs = build_distillation_corpus(&queries, &pipeline, &oracle, 0).unwrap();
    println!("instruction-summary pairs: {}", pairs.len());
    if let Some(pair) = pairs.first() {
        let preview: String = pair.instruction.chars().take(120).collect();
        println!("  [{}] instruction starts: {preview}...", pair.query_id);
        println!("  [{}] teacher summary:    {}", pair.query_id, pair.summary);
    }

    let triples = build_alignment_corpus(&queries, &pipeline, &oracle, 160, 0).unwrap();
    let correct = triples.iter().filter(|t| t.label == 1).count();
    println!("\nalignment triples: {} ({} labelled correct)", triples.len(), correct);
    for t in triples.iter().take(3) {
        println!("  [{}] label={} response={:?}", t.query_id, t.label, t.response);
    }
}
