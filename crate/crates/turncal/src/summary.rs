//! Precomputed per-record score profiles.
//!
//! Clustering, entropies, stop scores, and gold-cluster confidences depend
//! only on the record and the clustering configuration, never on budgets or
//! thresholds. Computing them once per record lets the budget grid search
//! evaluate thousands of allocations without re-clustering anything.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_record_turn, ClusteringConfig};
use crate::error::Result;
use crate::trajectory::{GoldMatcher, TrajectoryRecord};

/// Which per-turn statistic drives the stopping decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopScoreMode {
    /// Highest entropy-penalized cluster confidence of the turn.
    #[default]
    PenalizedFreq,
    /// Negated normalized entropy (higher = more concentrated).
    NegEntropy,
}

/// Score profile of one record: everything the calibration sweep needs,
/// with clustering already folded in.
#[derive(Debug, Clone)]
pub struct RecordSummary {
    pub id: String,
    /// First turn whose samples contain a gold match, if any.
    pub first_gold_turn: Option<usize>,
    /// Per-turn max penalized cluster confidence.
    pub penalized_scores: Vec<f64>,
    /// Per-turn negated normalized entropy.
    pub neg_entropy_scores: Vec<f64>,
    /// Running max over turns `0..=t` of the best penalized confidence among
    /// gold-containing clusters; `-inf` while no gold cluster has appeared.
    pub gold_conf_prefix: Vec<f64>,
}

impl RecordSummary {
    pub fn build(
        record: &TrajectoryRecord,
        config: &ClusteringConfig,
        matcher: GoldMatcher,
    ) -> Result<RecordSummary> {
        let turns = record.turns.len();
        let m = record.samples_per_turn();
        let mut penalized_scores = Vec::with_capacity(turns);
        let mut neg_entropy_scores = Vec::with_capacity(turns);
        let mut gold_conf_prefix = Vec::with_capacity(turns);
        let mut first_gold_turn = None;
        let mut running_gold = f64::NEG_INFINITY;
        for t in 0..turns {
            let clusters = cluster_record_turn(record, t, config)?;
            let best = clusters
                .iter()
                .map(|c| c.penalized_confidence)
                .fold(f64::NEG_INFINITY, f64::max);
            penalized_scores.push(best);
            let ne = if m < 2 {
                0.0
            } else {
                crate::clustering::normalized_entropy(&clusters, m)?
            };
            neg_entropy_scores.push(-ne);
            for c in &clusters {
                let has_gold = c
                    .members
                    .iter()
                    .any(|&i| matcher.matches(&record.turns[t].samples[i].text, &record.gold_answers));
                if has_gold {
                    if first_gold_turn.is_none() {
                        first_gold_turn = Some(t);
                    }
                    running_gold = running_gold.max(c.penalized_confidence);
                }
            }
            gold_conf_prefix.push(running_gold);
        }
        Ok(RecordSummary {
            id: record.id.clone(),
            first_gold_turn,
            penalized_scores,
            neg_entropy_scores,
            gold_conf_prefix,
        })
    }

    pub fn turn_count(&self) -> usize {
        self.penalized_scores.len()
    }

    /// Highest turn index.
    pub fn max_turn(&self) -> usize {
        self.turn_count().saturating_sub(1)
    }

    pub fn stop_score(&self, t: usize, mode: StopScoreMode) -> f64 {
        match mode {
            StopScoreMode::PenalizedFreq => self.penalized_scores[t],
            StopScoreMode::NegEntropy => self.neg_entropy_scores[t],
        }
    }

    /// Gold sampled at some turn `<= t`?
    pub fn gold_sampled_by(&self, t: usize) -> bool {
        self.first_gold_turn.is_some_and(|f| f <= t)
    }

    /// Gold sampled in any turn at all?
    pub fn answerable_final(&self) -> bool {
        self.first_gold_turn.is_some()
    }

    /// Best gold-cluster confidence over turns `0..=t`, if the gold has
    /// appeared by then.
    pub fn gold_confidence_by(&self, t: usize) -> Option<f64> {
        if self.gold_sampled_by(t) {
            Some(self.gold_conf_prefix[t])
        } else {
            None
        }
    }
}

/// Build summaries for a record set, in input order.
pub fn build_summaries(
    records: &[TrajectoryRecord],
    config: &ClusteringConfig,
    matcher: GoldMatcher,
    parallel: bool,
) -> Result<Vec<RecordSummary>> {
    if parallel {
        records
            .par_iter()
            .map(|r| RecordSummary::build(r, config, matcher))
            .collect()
    } else {
        records
            .iter()
            .map(|r| RecordSummary::build(r, config, matcher))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::ClusterMode;
    use crate::trajectory::{AnswerSample, TurnLog};

    fn record(samples_per_turn: &[&[&str]], golds: &[&str]) -> TrajectoryRecord {
        TrajectoryRecord {
            id: "r".into(),
            question: "q".into(),
            gold_answers: golds.iter().map(|s| s.to_string()).collect(),
            turns: samples_per_turn
                .iter()
                .enumerate()
                .map(|(t, texts)| TurnLog {
                    t,
                    passages: vec![],
                    samples: texts
                        .iter()
                        .map(|s| AnswerSample {
                            text: s.to_string(),
                            embedding: None,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    fn config() -> ClusteringConfig {
        ClusteringConfig {
            mode: ClusterMode::ExactMatch,
            eta: 0.1,
            ..Default::default()
        }
    }

    #[test]
    fn summary_tracks_gold_and_scores() {
        // Turn 0: no gold, uniform over 4 -> NE = 1, best pc = 0.25 - 0.1.
        // Turn 1: gold "g" at frequency 0.5, NE of (0.5, 0.25, 0.25) = 0.75.
        let r = record(&[&["w", "x", "y", "z"], &["g", "g", "x", "y"]], &["g"]);
        let s = RecordSummary::build(&r, &config(), GoldMatcher::NormalizedExact).unwrap();
        assert_eq!(s.first_gold_turn, Some(1));
        assert!(!s.gold_sampled_by(0));
        assert!(s.gold_sampled_by(1));
        assert!((s.penalized_scores[0] - 0.15).abs() < 1e-12);
        assert!((s.neg_entropy_scores[0] - (-1.0)).abs() < 1e-12);
        assert!((s.penalized_scores[1] - (0.5 - 0.1 * 0.75)).abs() < 1e-12);
        assert_eq!(s.gold_confidence_by(0), None);
        let g1 = s.gold_confidence_by(1).unwrap();
        assert!((g1 - (0.5 - 0.075)).abs() < 1e-12);
    }

    #[test]
    fn gold_prefix_is_running_max() {
        let r = record(
            &[&["g", "x", "y", "z"], &["g", "g", "g", "x"], &["x", "y", "z", "w"]],
            &["g"],
        );
        let s = RecordSummary::build(&r, &config(), GoldMatcher::NormalizedExact).unwrap();
        let g0 = s.gold_confidence_by(0).unwrap();
        let g1 = s.gold_confidence_by(1).unwrap();
        let g2 = s.gold_confidence_by(2).unwrap();
        assert!(g1 > g0);
        // Turn 2 has no gold cluster; prefix keeps the turn-1 peak.
        assert_eq!(g1, g2);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let records: Vec<_> = (0..20)
            .map(|i| {
                let mut r = record(&[&["a", "b"], &["g", "b"]], &["g"]);
                r.id = format!("r{i}");
                r
            })
            .collect();
        let serial = build_summaries(&records, &config(), GoldMatcher::NormalizedExact, false).unwrap();
        let parallel = build_summaries(&records, &config(), GoldMatcher::NormalizedExact, true).unwrap();
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.penalized_scores, b.penalized_scores);
            assert_eq!(a.gold_conf_prefix, b.gold_conf_prefix);
        }
    }
}
