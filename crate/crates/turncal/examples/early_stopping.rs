//! Calibrate per-turn stopping thresholds from explicit budgets and apply
//! them to held-out records.
//!
//! ```bash
//! cargo run --example early_stopping
//! ```

use turncal::clustering::ClusteringConfig;
use turncal::simulator::{generate_trajectories, SimConfig};
use turncal::stopping::{apply_stopping, calibrate_stop_thresholds};
use turncal::summary::StopScoreMode;
use turncal::trajectory::GoldMatcher;

fn main() -> turncal::Result<()> {
    let sim = SimConfig {
        n_records: 1200,
        seed: 1,
        ..Default::default()
    };
    let (records, _) = generate_trajectories(&sim, true)?;
    let (cal, test) = records.split_at(1000);

    let config = ClusteringConfig::default();
    let mode = StopScoreMode::PenalizedFreq;
    // One budget per turn (turn 3 is the final turn: everyone left stops
    // there anyway, its threshold is bookkeeping).
    let alphas = [0.02, 0.015, 0.01, 0.0];
    let budgets =
        calibrate_stop_thresholds(cal, &alphas, &config, mode, GoldMatcher::NormalizedExact)?;

    println!("turn  alpha_t  threshold            active  unanswerable  c_ans_t");
    for b in &budgets {
        println!(
            "{:>4}  {:<7} {:<20} {:>6}  {:>12}  {:.3}",
            b.t,
            b.alpha_t,
            format!("{:?}", b.q_t.value),
            b.n_active,
            b.n_unanswerable,
            b.c_ans_t
        );
    }

    println!("\nstopping decisions on held-out records:");
    for record in test.iter().take(6) {
        let outcome = apply_stopping(record, &budgets, &config, mode)?;
        println!(
            "  {}: t* = {} ({}), scores {:?}",
            outcome.id,
            outcome.t_star,
            if outcome.early_stopped { "early" } else { "ran all turns" },
            outcome
                .scores
                .iter()
                .map(|s| format!("{s:.2}"))
                .collect::<Vec<_>>()
        );
    }
    let early = test
        .iter()
        .map(|r| apply_stopping(r, &budgets, &config, mode).unwrap())
        .filter(|o| o.early_stopped)
        .count();
    println!(
        "\n{early} of {} held-out records stop before the final turn",
        test.len()
    );
    Ok(())
}
