//! Grid-search the per-turn error-budget allocation on an optimization set.
//!
//! ```bash
//! cargo run --example search_budgets
//! ```

use turncal::clustering::ClusteringConfig;
use turncal::simulator::{generate_trajectories, SimConfig};
use turncal::stopping::grid_search;
use turncal::summary::StopScoreMode;
use turncal::trajectory::GoldMatcher;

fn main() -> turncal::Result<()> {
    let sim = SimConfig {
        n_records: 500,
        seed: 99,
        ..Default::default()
    };
    let (opt, _) = generate_trajectories(&sim, true)?;

    let alpha = 0.1;
    let grid_steps = 10; // 10^3 = 1000 candidate heads for 4-turn records
    let allocation = grid_search(
        &opt,
        alpha,
        grid_steps,
        1.0,
        &ClusteringConfig::default(),
        StopScoreMode::PenalizedFreq,
        GoldMatcher::NormalizedExact,
        true,
    )?;

    println!(
        "searched {grid_steps}^3 allocations at alpha = {alpha}; chosen budgets:"
    );
    for b in &allocation.budgets {
        println!(
            "  turn {}: alpha_t = {:.4}, threshold {:?}",
            b.t, b.alpha_t, b.q_t.value
        );
    }
    println!(
        "\nbudget decomposition: spent {:.6} of available {:.6} \
         (c_ans_final = {:.3})",
        allocation.budget_spent(),
        allocation.budget_available(),
        allocation.c_ans_final
    );
    allocation.check_budget()?;
    println!("constraint satisfied");
    Ok(())
}
