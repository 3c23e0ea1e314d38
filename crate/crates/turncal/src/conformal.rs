//! Finite-sample conformal quantiles.
//!
//! Two primitives back every calibration stage in this crate:
//!
//! - [`lower_quantile`]: `k = floor(alpha * (n + 1))`-th smallest score.
//!   For an exchangeable new score `s`, `P(s < threshold) <= k/(n+1) <= alpha`,
//!   so admitting `s >= threshold` keeps at least a `1 - alpha` fraction.
//! - [`upper_quantile`]: `k = ceil((n + 1) * (1 - alpha))`-th smallest score.
//!   For an exchangeable new score `s`, `P(s >= threshold) <= alpha`, so a
//!   "stop when `s >= threshold`" rule fires on at most an `alpha` fraction.
//!
//! Out-of-range indices degrade to sentinels rather than clamping to the
//! sample extremes: clamping would silently forfeit the finite-sample bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calibrated threshold value, possibly an infinite sentinel.
///
/// Serialized with an explicit tag so reports stay auditable (JSON has no
/// infinity literal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ThresholdValue {
    /// Admits every score under a `score >= threshold` test.
    NegInf,
    Finite(f64),
    /// Admits no score under a `score >= threshold` test.
    PosInf,
}

impl ThresholdValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, ThresholdValue::Finite(_))
    }

    /// The threshold as an `f64`, mapping sentinels to IEEE infinities.
    pub fn as_f64(&self) -> f64 {
        match self {
            ThresholdValue::NegInf => f64::NEG_INFINITY,
            ThresholdValue::Finite(v) => *v,
            ThresholdValue::PosInf => f64::INFINITY,
        }
    }
}

/// A conformal threshold together with the level and sample count that
/// produced it, so every admission decision can be audited afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: ThresholdValue,
    /// The error level `alpha` the threshold was calibrated at.
    pub level: f64,
    /// Number of calibration scores.
    pub n: usize,
}

impl Threshold {
    pub fn neg_inf(level: f64, n: usize) -> Self {
        Threshold {
            value: ThresholdValue::NegInf,
            level,
            n,
        }
    }

    pub fn pos_inf(level: f64, n: usize) -> Self {
        Threshold {
            value: ThresholdValue::PosInf,
            level,
            n,
        }
    }

    pub fn finite(value: f64, level: f64, n: usize) -> Self {
        Threshold {
            value: ThresholdValue::Finite(value),
            level,
            n,
        }
    }

    /// Inclusive admission test: does `score >= threshold` hold?
    pub fn admits(&self, score: f64) -> bool {
        match self.value {
            ThresholdValue::NegInf => true,
            ThresholdValue::Finite(v) => score >= v,
            ThresholdValue::PosInf => false,
        }
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::invalid("quantile of an empty score set"));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite calibration score {s}")));
    }
    Ok(())
}

fn kth_smallest(scores: &[f64], k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= scores.len());
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted[k - 1]
}

/// Lower conformal quantile: the `k = floor(alpha * (n + 1))`-th smallest
/// score, or [`ThresholdValue::NegInf`] when `k < 1`.
///
/// Scores are treated as a multiset; duplicates count once each.
pub fn lower_quantile(scores: &[f64], alpha: f64) -> Result<Threshold> {
    check_scores(scores)?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "lower quantile level must be in [0, 1), got {alpha}"
        )));
    }
    let n = scores.len();
    let k = (alpha * (n + 1) as f64).floor() as usize;
    if k < 1 {
        return Ok(Threshold::neg_inf(alpha, n));
    }
    Ok(Threshold::finite(kth_smallest(scores, k), alpha, n))
}

/// Upper conformal quantile: the `k = ceil((n + 1) * (1 - alpha))`-th
/// smallest score.
///
/// Returns [`ThresholdValue::PosInf`] when `k > n` (no finite threshold can
/// bound the tail) and [`ThresholdValue::NegInf`] when `k < 1` (`alpha >= 1`,
/// every score may be admitted). Accepts `alpha` in `[0, 1]`; the budget
/// sweep legitimately produces per-turn levels of exactly 0.
pub fn upper_quantile(scores: &[f64], alpha: f64) -> Result<Threshold> {
    check_scores(scores)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "upper quantile level must be in [0, 1], got {alpha}"
        )));
    }
    let n = scores.len();
    let k = ((n + 1) as f64 * (1.0 - alpha)).ceil() as usize;
    if k > n {
        return Ok(Threshold::pos_inf(alpha, n));
    }
    if k < 1 {
        return Ok(Threshold::neg_inf(alpha, n));
    }
    Ok(Threshold::finite(kth_smallest(scores, k), alpha, n))
}
