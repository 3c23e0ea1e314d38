//! The two finite-sample quantile rules behind every threshold in the crate.
//!
//! ```bash
//! cargo run --example conformal_quantiles
//! ```

use turncal::conformal::{lower_quantile, upper_quantile};

fn main() -> turncal::Result<()> {
    let scores: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    println!("calibration scores: {scores:?}\n");

    // Lower quantile: admit new scores >= threshold and at most an alpha
    // fraction of exchangeable scores falls below it.
    for alpha in [0.05, 0.2, 0.5] {
        let t = lower_quantile(&scores, alpha)?;
        println!("lower_quantile(alpha = {alpha:>4}): {:?} (n = {})", t.value, t.n);
    }

    // Upper quantile: a "stop when score >= threshold" rule fires on at
    // most an alpha fraction of exchangeable scores.
    for alpha in [0.0, 0.1, 0.5] {
        let t = upper_quantile(&scores, alpha)?;
        println!("upper_quantile(alpha = {alpha:>4}): {:?}", t.value);
    }

    // Sentinels carry admission semantics rather than fake numbers.
    let keep_all = lower_quantile(&scores, 0.05)?;
    println!(
        "\nlower at alpha = 0.05 admits 0.01? {} (k = floor(0.05 * 11) = 0 -> -inf)",
        keep_all.admits(0.01)
    );
    let stop_none = upper_quantile(&scores, 0.0)?;
    println!(
        "upper at alpha = 0 admits 0.99? {} (k = 11 > n -> +inf)",
        stop_none.admits(0.99)
    );
    Ok(())
}
