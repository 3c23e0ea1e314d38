//! Cluster sampled answers and compute entropy-penalized confidences.
//!
//! ```bash
//! cargo run --example cluster_answers
//! ```

use turncal::clustering::{cluster_answers, normalized_entropy, ClusterMode, ClusteringConfig};
use turncal::trajectory::AnswerSample;

fn sample(text: &str, embedding: &[f64]) -> AnswerSample {
    AnswerSample {
        text: text.to_string(),
        embedding: Some(embedding.to_vec()),
    }
}

fn main() -> turncal::Result<()> {
    // Two tight groups plus a stray answer; embeddings are unit vectors, so
    // cosine similarity within a group is ~0.99 and across groups ~0.
    let e = |a: f64, b: f64| {
        let n = (a * a + b * b).sqrt();
        [a / n, b / n]
    };
    let samples = vec![
        sample("Paris", &e(1.0, 0.02)),
        sample("paris, France", &e(1.0, 0.05)),
        sample("Paris!", &e(1.0, 0.00)),
        sample("Lyon", &e(0.02, 1.0)),
        sample("lyon", &e(0.00, 1.0)),
        sample("Toulouse", &e(-0.7, 0.7)),
    ];

    let config = ClusteringConfig::default(); // embedding mode, threshold 0.9
    let clusters = cluster_answers(&samples, &config)?;
    let ne = normalized_entropy(&clusters, samples.len())?;
    println!("embedding mode (threshold {}):", config.similarity_threshold);
    for c in &clusters {
        println!(
            "  {:<14} members {:?}  frequency {:.3}  penalized confidence {:+.3}",
            c.representative, c.members, c.frequency, c.penalized_confidence
        );
    }
    println!("  turn NE = {ne:.4} (penalty = eta * NE = {:.4})\n", config.eta * ne);

    // Without embeddings, grouping falls back to normalized exact match:
    // casing and punctuation are ignored, "paris, France" stays separate.
    let exact = ClusteringConfig {
        mode: ClusterMode::ExactMatch,
        ..config
    };
    let clusters = cluster_answers(&samples, &exact)?;
    println!("exact-match mode:");
    for c in &clusters {
        println!(
            "  {:<14} members {:?}  frequency {:.3}",
            c.representative, c.members, c.frequency
        );
    }
    Ok(())
}
