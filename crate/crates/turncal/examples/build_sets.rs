//! Full calibration, then prediction sets with abstention for test records.
//!
//! ```bash
//! cargo run --example build_sets
//! ```

use turncal::answer_set::build_prediction_set;
use turncal::artifact::{calibrate, BudgetSpec, Provenance, RunConfig};
use turncal::simulator::{generate_trajectories, SimConfig};
use turncal::stopping::apply_stopping;
use turncal::trajectory::split_dataset;

fn main() -> turncal::Result<()> {
    let sim = SimConfig {
        n_records: 900,
        seed: 23,
        ..Default::default()
    };
    let (records, _) = generate_trajectories(&sim, true)?;
    let split = split_dataset(records, 5, (300, 300, 300))?;

    let run = RunConfig {
        alpha: 0.1,
        grid_steps: 6,
        seed: 5,
        ..Default::default()
    };
    let artifact = calibrate(
        &split.cal,
        Some(&split.opt),
        &BudgetSpec::GridSearch,
        &run,
        Provenance::with_seed(5),
        true,
    )?;
    println!(
        "calibrated: q_freq = {:?}, per-turn budgets {:?}\n",
        artifact.q_freq.value,
        artifact
            .allocation
            .alphas()
            .iter()
            .map(|a| format!("{a:.4}"))
            .collect::<Vec<_>>()
    );

    let config = run.clustering_config();
    for record in split.test.iter().take(8) {
        let outcome = apply_stopping(
            record,
            &artifact.allocation.budgets,
            &config,
            artifact.allocation.stop_score_mode,
        )?;
        let set = build_prediction_set(record, &outcome, &artifact.q_freq, &config)?;
        let members: Vec<String> = set
            .clusters
            .iter()
            .map(|e| format!("{} ({:.2}, t{})", e.representative, e.penalized_confidence, e.turn))
            .collect();
        println!(
            "{}: stopped at turn {}, set size {} {}{{{}}}",
            set.id,
            set.t_star,
            set.size,
            if set.cant_answer { "[Can't Answer] " } else { "" },
            members.join(", ")
        );
    }
    Ok(())
}
