//! Index the bundled toy corpus and rank it against a query.
//!
//! Run: `cargo run --example retrieve`

use metrag::retriever::{build_index, retrieve_topk, softmax_distribution};
use metrag::textcore::EncoderParams;
use metrag::toy;

fn main() {
    let params = EncoderParams::identity(512);
    let index = build_index(&toy::corpus(), &params).expect("toy corpus indexes");

    let query = "Tell me about author George RR Martin";
    println!("query: {query}\n");

    let hits = retrieve_topk(&index, query, 5).expect("retrieval succeeds");
    for (rank, hit) in hits.iter().enumerate() {
        let title = index.document(&hit.doc_id).map(|d| d.title.clone()).unwrap_or_default();
        println!("{:2}. {:<16} {:+.4}  {}", rank + 1, hit.doc_id, hit.score, title);
    }

    // The temperature softmax turns raw scores into the retrieval
    // likelihood; low temperatures sharpen it toward the top hit.
    for tau in [1.0, 0.05] {
        let dist = softmax_distribution(&hits, tau).expect("distribution");
        let probs: Vec<String> = dist
            .entries()
            .iter()
            .map(|(id, p)| format!("{id}={p:.3}"))
            .collect();
        println!("\nlikelihood at tau={tau}: {}", probs.join("  "));
    }
}
