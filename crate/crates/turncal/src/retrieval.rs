//! Stage 1: retrieval-filter calibration.
//!
//! For every gold passage that shows up in at least one turn's retrieval,
//! its optimistic relevance score is the maximum score across the turns
//! where it appears. Pooling those scores over the calibration set and
//! taking a lower conformal quantile yields a filter threshold that keeps
//! at least a `1 - alpha_ret` fraction of retrievable gold passages on
//! exchangeable data, while discarding low-relevance evidence.
//!
//! Gold passages that never appear in any turn contribute nothing: the
//! threshold is calibrated on what the retriever can actually surface.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conformal::{lower_quantile, Threshold};
use crate::error::{Error, Result};
use crate::trajectory::{PassageHit, TrajectoryRecord, TurnLog};

/// The calibrated retrieval filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalArtifact {
    pub q_ret: Threshold,
    pub alpha_ret: f64,
    /// Number of pooled optimistic gold scores.
    pub n_gold_scores: usize,
}

/// Maximum relevance score over all turns where one gold passage appears.
pub fn optimistic_score(occurrences: &[(usize, f64)]) -> Result<f64> {
    if occurrences.is_empty() {
        return Err(Error::invalid(
            "optimistic score of a passage with no occurrences",
        ));
    }
    Ok(occurrences
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Optimistic scores of every retrievable gold passage in one record,
/// keyed and ordered by passage id.
pub fn record_gold_scores(record: &TrajectoryRecord) -> Vec<(String, f64)> {
    let mut by_pid: BTreeMap<&str, f64> = BTreeMap::new();
    for turn in &record.turns {
        for p in &turn.passages {
            if p.is_gold {
                by_pid
                    .entry(p.pid.as_str())
                    .and_modify(|s| *s = s.max(p.score))
                    .or_insert(p.score);
            }
        }
    }
    by_pid.into_iter().map(|(p, s)| (p.to_string(), s)).collect()
}

/// Calibrate the retrieval threshold on pooled optimistic gold scores.
pub fn calibrate_retrieval(
    cal: &[TrajectoryRecord],
    alpha_ret: f64,
) -> Result<RetrievalArtifact> {
    if !(alpha_ret > 0.0 && alpha_ret < 1.0) {
        return Err(Error::invalid(format!(
            "alpha_ret must be in (0, 1), got {alpha_ret}"
        )));
    }
    let mut scores = Vec::new();
    for record in cal {
        for (_, s) in record_gold_scores(record) {
            scores.push(s);
        }
    }
    if scores.is_empty() {
        return Err(Error::invalid(
            "no retrievable gold passages in calibration set",
        ));
    }
    let q_ret = lower_quantile(&scores, alpha_ret)?;
    Ok(RetrievalArtifact {
        q_ret,
        alpha_ret,
        n_gold_scores: scores.len(),
    })
}

/// Keep passages whose score meets the threshold, preserving input order.
pub fn filter_passages(turn: &TurnLog, artifact: &RetrievalArtifact) -> Vec<PassageHit> {
    turn.passages
        .iter()
        .filter(|p| artifact.q_ret.admits(p.score))
        .cloned()
        .collect()
}

/// Gold retention of a filter over a record set: for each record with at
/// least one retrievable gold passage, the fraction of its golds whose
/// optimistic score passes the threshold; macro-averaged over such records.
/// Returns `(retention, n_records_with_gold)`.
pub fn gold_retention(records: &[TrajectoryRecord], artifact: &RetrievalArtifact) -> (f64, usize) {
    let mut fractions = Vec::new();
    for record in records {
        let golds = record_gold_scores(record);
        if golds.is_empty() {
            continue;
        }
        let kept = golds.iter().filter(|(_, s)| artifact.q_ret.admits(*s)).count();
        fractions.push(kept as f64 / golds.len() as f64);
    }
    if fractions.is_empty() {
        return (1.0, 0);
    }
    let n = fractions.len();
    (fractions.iter().sum::<f64>() / n as f64, n)
}
