//! The alignment objective: Bernoulli BCE over implicit policy rewards.
//!
//! No model weights live in this crate; the objective and its gradient are
//! exposed for an external fine-tuning harness. This example evaluates
//! them on a tiny hand-made corpus and cross-checks the gradient with
//! central finite differences.
//!
//! Run: `cargo run --example alignment_losses`

use metrag::summarizer::{
    alignment_objective, alignment_objective_with_grad, correctness_prob, dpo_implicit_reward,
    AlignmentTriple, PolicyLogProbs,
};

fn triple(query_id: &str, response: &str, label: u8) -> AlignmentTriple {
    AlignmentTriple {
        query_id: query_id.to_string(),
        prompt: format!("answer prompt for {query_id}"),
        response: response.to_string(),
        label,
    }
}

fn main() {
    let corpus = vec![
        triple("q1", "A Song of Ice and Fire", 1),
        triple("q2", "unknown", 0),
        triple("q3", "The Gullwing Beacon", 1),
    ];
    // Log-probabilities of each response under the policy being aligned
    // and under the frozen reference policy.
    let mut logprobs = vec![
        PolicyLogProbs { logp_policy: -0.8, logp_sft: -1.1 },
        PolicyLogProbs { logp_policy: -0.4, logp_sft: -0.9 },
        PolicyLogProbs { logp_policy: -2.1, logp_sft: -1.9 },
    ];
    let beta = 0.1;

    for (t, lp) in corpus.iter().zip(&logprobs) {
        let reward = dpo_implicit_reward(lp, beta).unwrap();
        println!(
            "{}: label={} implicit reward {:+.4} p(correct)={:.4}",
            t.query_id,
            t.label,
            reward,
            correctness_prob(reward)
        );
    }

    let (loss, grad) = alignment_objective_with_grad(&corpus, &logprobs, beta).unwrap();
    println!("\nalignment objective: {loss:.6}");
    println!("gradient wrt policy log-probs: {grad:?}");

    // Central finite differences agree with the analytic gradient.
    let h = 1e-6;
    for i in 0..logprobs.len() {
        let orig = logprobs[i].logp_policy;
        logprobs[i].logp_policy = orig + h;
        let plus = alignment_objective(&corpus, &logprobs, beta).unwrap();
        logprobs[i].logp_policy = orig - h;
        let minus = alignment_objective(&corpus, &logprobs, beta).unwrap();
        logprobs[i].logp_policy = orig;
        let fd = (plus - minus) / (2.0 * h);
        println!(
            "component {i}: analytic {:+.8} finite-difference {:+.8}",
            grad[i], fd
        );
    }
}
