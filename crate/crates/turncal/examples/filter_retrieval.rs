//! Calibrate the retrieval filter and check gold retention on held-out data.
//!
//! ```bash
//! cargo run --example filter_retrieval
//! ```

use turncal::retrieval::{calibrate_retrieval, filter_passages, gold_retention};
use turncal::simulator::{generate_trajectories, SimConfig};

fn main() -> turncal::Result<()> {
    let config = SimConfig {
        n_records: 2000,
        seed: 42,
        ..Default::default()
    };
    let (records, _) = generate_trajectories(&config, true)?;
    let (cal, test) = records.split_at(1000);

    for alpha_ret in [0.05, 0.1, 0.2] {
        let artifact = calibrate_retrieval(cal, alpha_ret)?;
        let (retention, n) = gold_retention(test, &artifact);
        println!(
            "alpha_ret {alpha_ret:>4}: q_ret = {:?} from {} gold scores; \
             held-out retention {retention:.4} over {n} records (nominal {:.2})",
            artifact.q_ret.value,
            artifact.n_gold_scores,
            1.0 - alpha_ret
        );
    }
    println!(
        "\nretention tracks the nominal level in expectation; a single split \
         fluctuates by ~1/sqrt(n)."
    );

    // What filtering does to one turn's retrieval list.
    let artifact = calibrate_retrieval(cal, 0.1)?;
    let turn = &test[0].turns[0];
    let kept = filter_passages(turn, &artifact);
    println!(
        "\nrecord {} turn 0: {} of {} passages kept ({} gold among kept)",
        test[0].id,
        kept.len(),
        turn.passages.len(),
        kept.iter().filter(|p| p.is_gold).count()
    );
    Ok(())
}
