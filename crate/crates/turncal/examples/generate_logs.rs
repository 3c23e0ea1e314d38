//! Generate a synthetic multi-turn trajectory log with known ground truth.
//!
//! ```bash
//! cargo run --example generate_logs
//! ```

use turncal::simulator::{generate_trajectories, SimConfig};
use turncal::trajectory::write_trajectory_file;

fn main() -> turncal::Result<()> {
    let config = SimConfig {
        n_records: 200,
        seed: 7,
        // Probability that the gold answer first becomes sampleable at
        // turn 0, 1, 2, 3 — and never, for the last entry.
        first_answerable_turn_probs: vec![0.35, 0.2, 0.15, 0.1, 0.2],
        ..Default::default()
    };
    let (records, truth) = generate_trajectories(&config, true)?;

    let dir = std::env::temp_dir().join("turncal-example");
    std::fs::create_dir_all(&dir)?;
    let log_path = dir.join("logs.jsonl");
    write_trajectory_file(&records, &log_path)?;
    let truth_path = dir.join("logs.truth.json");
    std::fs::write(&truth_path, serde_json::to_string_pretty(&truth).unwrap())?;

    println!("wrote {} records to {}", records.len(), log_path.display());
    println!("ground truth sidecar: {}", truth_path.display());

    let never = truth
        .records
        .iter()
        .filter(|r| r.first_answerable_turn.is_none())
        .count();
    println!(
        "never-answerable fraction: {:.3} (configured {:.3})",
        never as f64 / records.len() as f64,
        config.first_answerable_turn_probs.last().unwrap()
    );
    let r = &records[0];
    println!(
        "first record: {} turns, {} samples/turn, {} passages/turn, gold answer {:?}",
        r.turns.len(),
        r.samples_per_turn(),
        r.turns[0].passages.len(),
        r.gold_answers[0]
    );
    Ok(())
}
