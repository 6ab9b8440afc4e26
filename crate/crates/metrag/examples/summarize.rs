//! Query-focused extractive summarization of a long passage.
//!
//! Run: `cargo run --example summarize`

use metrag::summarizer::{compression_ratio, extractive_summarize};
use metrag::toy;
use metrag::utility::Query;

fn main() {
    let document = toy::walter_document();
    let query = Query {
        id: "walter".to_string(),
        text: "What is Walter de la Pole's occupation?".to_string(),
        gold_answers: vec!["English politician".to_string()],
    };

    println!("original: {} characters", document.text.chars().count());
    let docs = vec![document];
    let summary = extractive_summarize(&query, &docs, 300);
    println!("\nsummary ({} characters):\n{summary}", summary.chars().count());
    println!(
        "\ncompression ratio: {:.4}",
        compression_ratio(&summary, &docs).unwrap()
    );

    // The reference one-line summary compresses the same passage to about
    // one percent of its size.
    let reference = toy::WALTER_SUMMARY;
    println!(
        "reference summary ratio: {:.5} ({:?})",
        compression_ratio(reference, &docs).unwrap(),
        reference
    );
}
