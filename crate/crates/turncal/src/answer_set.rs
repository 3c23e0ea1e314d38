//! Final prediction-set construction and evaluation.
//!
//! After stopping at turn `t*`, the prediction set is the union over turns
//! `0..=t*` of clusters whose penalized confidence meets the calibrated
//! frequency threshold; when the record exhausted all its turns, the
//! abstention label is appended so never-answerable questions stay covered.
//! A record counts as covered when either its gold answer was sampled by
//! `t*` and a gold-matching cluster made it into the set, or the gold was
//! never sampled by `t*` and the set abstains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::CalibrationArtifact;
use crate::clustering::{cluster_record_turn, Cluster, ClusteringConfig};
use crate::conformal::{lower_quantile, Threshold};
use crate::error::{Error, Result};
use crate::retrieval::record_gold_scores;
use crate::stopping::{composite_objective, StopOutcome, TurnTally};
use crate::summary::StopScoreMode;
use crate::trajectory::{normalize_answer, GoldMatcher, TrajectoryRecord};

/// Label appended when a record exhausts all turns.
pub const CANT_ANSWER: &str = "Can't Answer";

/// One admitted answer cluster in a prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub representative: String,
    pub penalized_confidence: f64,
    /// Earliest turn the cluster was admitted from.
    pub turn: usize,
}

/// The final output for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub id: String,
    pub t_star: usize,
    pub clusters: Vec<SetEntry>,
    /// Present only when the record ran through its final turn.
    pub cant_answer: bool,
    /// Distinct merged clusters, plus one for the abstention label.
    pub size: usize,
}

/// Per-record evaluation row (the flat CSV schema).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub id: String,
    pub t_star: usize,
    pub set_size: usize,
    pub covered: bool,
    pub cant_answer: bool,
}

/// Aggregate evaluation metrics over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_records: usize,
    pub coverage_rate: f64,
    pub gold_retention_rate: f64,
    pub avg_turns: f64,
    pub avg_set_size: f64,
    /// Fraction of records that answered (no abstention label).
    pub answer_rate: f64,
    pub composite_l: f64,
    pub per_turn: Vec<TurnTally>,
    pub alpha_total: f64,
    pub alpha_ret: f64,
    pub gamma: f64,
}

/// Best penalized confidence among gold-containing clusters over turns
/// `0..=t_star`, or `None` when the gold answer was never sampled by then
/// (such records are excluded from the frequency calibration set).
pub fn gold_confidence(
    record: &TrajectoryRecord,
    t_star: usize,
    config: &ClusteringConfig,
    matcher: GoldMatcher,
) -> Result<Option<f64>> {
    if t_star >= record.turns.len() {
        return Err(Error::invalid(format!(
            "record {}: stopping turn {t_star} out of range",
            record.id
        )));
    }
    let mut best = f64::NEG_INFINITY;
    let mut seen_gold = false;
    for t in 0..=t_star {
        for cluster in cluster_record_turn(record, t, config)? {
            let has_gold = cluster
                .members
                .iter()
                .any(|&i| matcher.matches(&record.turns[t].samples[i].text, &record.gold_answers));
            if has_gold {
                seen_gold = true;
                best = best.max(cluster.penalized_confidence);
            }
        }
    }
    Ok(seen_gold.then_some(best))
}

/// Calibrate the answer-admission threshold on records whose gold answer
/// appeared in the samples before stopping.
pub fn calibrate_freq_threshold(
    records: &[TrajectoryRecord],
    outcomes: &[StopOutcome],
    alpha: f64,
    config: &ClusteringConfig,
    matcher: GoldMatcher,
) -> Result<Threshold> {
    if records.len() != outcomes.len() {
        return Err(Error::invalid(format!(
            "{} records but {} stop outcomes",
            records.len(),
            outcomes.len()
        )));
    }
    let mut confs = Vec::new();
    for (record, outcome) in records.iter().zip(outcomes) {
        if let Some(c) = gold_confidence(record, outcome.t_star, config, matcher)? {
            confs.push(c);
        }
    }
    if confs.is_empty() {
        return Err(Error::invalid(
            "no calibration record has its gold answer sampled before stopping",
        ));
    }
    lower_quantile(&confs, alpha)
}

/// Assemble a prediction set from per-turn cluster lists.
///
/// Clusters from different turns with the same normalized representative
/// are merged, keeping the first-seen representative, the earliest turn,
/// and the maximum confidence.
pub fn build_prediction_set_from_clusters(
    id: &str,
    per_turn: &[Vec<Cluster>],
    t_star: usize,
    last_turn: usize,
    q_freq: &Threshold,
) -> PredictionSet {
    let mut entries: Vec<(String, SetEntry)> = Vec::new();
    for (t, clusters) in per_turn.iter().enumerate().take(t_star + 1) {
        for cluster in clusters {
            if !q_freq.admits(cluster.penalized_confidence) {
                continue;
            }
            let key = normalize_answer(&cluster.representative);
            match entries.iter_mut().find(|(k, _)| *k == key) {
                Some((_, entry)) => {
                    entry.penalized_confidence =
                        entry.penalized_confidence.max(cluster.penalized_confidence);
                }
                None => entries.push((
                    key,
                    SetEntry {
                        representative: cluster.representative.clone(),
                        penalized_confidence: cluster.penalized_confidence,
                        turn: t,
                    },
                )),
            }
        }
    }
    let clusters: Vec<SetEntry> = entries.into_iter().map(|(_, e)| e).collect();
    let cant_answer = t_star == last_turn;
    let size = clusters.len() + usize::from(cant_answer);
    PredictionSet {
        id: id.to_string(),
        t_star,
        clusters,
        cant_answer,
        size,
    }
}

/// Build the prediction set for one record from its stop outcome.
pub fn build_prediction_set(
    record: &TrajectoryRecord,
    outcome: &StopOutcome,
    q_freq: &Threshold,
    config: &ClusteringConfig,
) -> Result<PredictionSet> {
    let last = record.max_turn();
    if outcome.t_star > last {
        return Err(Error::invalid(format!(
            "record {}: stopping turn {} beyond final turn {last}",
            record.id, outcome.t_star
        )));
    }
    let per_turn: Vec<Vec<Cluster>> = (0..=outcome.t_star)
        .map(|t| cluster_record_turn(record, t, config))
        .collect::<Result<_>>()?;
    Ok(build_prediction_set_from_clusters(
        &record.id,
        &per_turn,
        outcome.t_star,
        last,
        q_freq,
    ))
}

struct RecordEval {
    row: RecordRow,
    answered_correctly: bool,
    gold_retention: Option<f64>,
}

fn evaluate_record(
    record: &TrajectoryRecord,
    artifact: &CalibrationArtifact,
    config: &ClusteringConfig,
    matcher: GoldMatcher,
    mode: StopScoreMode,
) -> Result<RecordEval> {
    let budgets = &artifact.allocation.budgets;
    if budgets.len() < record.turns.len() {
        return Err(Error::invalid(format!(
            "record {} has {} turns but the artifact calibrated {}",
            record.id,
            record.turns.len(),
            budgets.len()
        )));
    }
    let last = record.max_turn();
    let mut per_turn: Vec<Vec<Cluster>> = Vec::with_capacity(last + 1);
    let mut gold_conf = f64::NEG_INFINITY;
    let mut gold_seen = false;
    let mut t_star = last;
    for (t, budget) in budgets.iter().enumerate().take(last + 1) {
        let clusters = cluster_record_turn(record, t, config)?;
        let score = match mode {
            StopScoreMode::PenalizedFreq => clusters
                .iter()
                .map(|c| c.penalized_confidence)
                .fold(f64::NEG_INFINITY, f64::max),
            StopScoreMode::NegEntropy => {
                let m = record.samples_per_turn();
                if m < 2 {
                    0.0
                } else {
                    -crate::clustering::normalized_entropy(&clusters, m)?
                }
            }
        };
        for cluster in &clusters {
            let has_gold = cluster
                .members
                .iter()
                .any(|&i| matcher.matches(&record.turns[t].samples[i].text, &record.gold_answers));
            if has_gold {
                gold_seen = true;
                gold_conf = gold_conf.max(cluster.penalized_confidence);
            }
        }
        per_turn.push(clusters);
        if budget.q_t.admits(score) || t == last {
            t_star = t;
            break;
        }
    }
    let set =
        build_prediction_set_from_clusters(&record.id, &per_turn, t_star, last, &artifact.q_freq);
    let answered_correctly = gold_seen && artifact.q_freq.admits(gold_conf);
    let covered = if gold_seen {
        answered_correctly
    } else {
        set.cant_answer
    };
    let golds = record_gold_scores(record);
    let gold_retention = if golds.is_empty() {
        None
    } else {
        let kept = golds
            .iter()
            .filter(|(_, s)| artifact.retrieval.q_ret.admits(*s))
            .count();
        Some(kept as f64 / golds.len() as f64)
    };
    Ok(RecordEval {
        row: RecordRow {
            id: record.id.clone(),
            t_star,
            set_size: set.size,
            covered,
            cant_answer: set.cant_answer,
        },
        answered_correctly,
        gold_retention,
    })
}

/// Apply a calibration artifact to a test set: filter bookkeeping, stopping,
/// set construction, and every aggregate metric.
pub fn evaluate(
    test: &[TrajectoryRecord],
    artifact: &CalibrationArtifact,
    parallel: bool,
) -> Result<(MetricsReport, Vec<RecordRow>)> {
    if test.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty test set"));
    }
    let run = &artifact.run_config;
    let config = run.clustering_config();
    let matcher = run.gold_matcher;
    let mode = artifact.allocation.stop_score_mode;
    let evals: Vec<RecordEval> = if parallel {
        test.par_iter()
            .map(|r| evaluate_record(r, artifact, &config, matcher, mode))
            .collect::<Result<_>>()?
    } else {
        test.iter()
            .map(|r| evaluate_record(r, artifact, &config, matcher, mode))
            .collect::<Result<_>>()?
    };

    let n = evals.len();
    let t_stars: Vec<usize> = evals.iter().map(|e| e.row.t_star).collect();
    // Answerability per turn, measured on the test set's own active sets.
    let turns = artifact.allocation.budgets.len();
    let mut tallies: Vec<TurnTally> = (0..turns)
        .map(|t| {
            let mut active = 0usize;
            let mut unanswerable = 0usize;
            for (record, &t_star) in test.iter().zip(&t_stars) {
                if t_star >= t {
                    active += 1;
                    if !record.gold_sampled_by(t.min(record.max_turn()), matcher) {
                        unanswerable += 1;
                    }
                }
            }
            let c_ans_t = if active == 0 {
                1.0
            } else {
                1.0 - unanswerable as f64 / active as f64
            };
            TurnTally {
                t,
                n_corr: 0,
                n_wrong: 0,
                c_ans_t,
            }
        })
        .collect();
    for eval in &evals {
        let tally = &mut tallies[eval.row.t_star];
        if eval.answered_correctly {
            tally.n_corr += 1;
        } else {
            tally.n_wrong += 1;
        }
    }
    let avg_turns = t_stars.iter().sum::<usize>() as f64 / n as f64;
    let coverage_rate = evals.iter().filter(|e| e.row.covered).count() as f64 / n as f64;
    let answer_rate = evals.iter().filter(|e| !e.row.cant_answer).count() as f64 / n as f64;
    let avg_set_size = evals.iter().map(|e| e.row.set_size).sum::<usize>() as f64 / n as f64;
    let retentions: Vec<f64> = evals.iter().filter_map(|e| e.gold_retention).collect();
    let gold_retention_rate = if retentions.is_empty() {
        1.0
    } else {
        retentions.iter().sum::<f64>() / retentions.len() as f64
    };
    let composite_l = composite_objective(&tallies, avg_turns, run.gamma);
    let report = MetricsReport {
        n_records: n,
        coverage_rate,
        gold_retention_rate,
        avg_turns,
        avg_set_size,
        answer_rate,
        composite_l,
        per_turn: tallies,
        alpha_total: run.alpha,
        alpha_ret: run.alpha_ret,
        gamma: run.gamma,
    };
    let rows = evals.into_iter().map(|e| e.row).collect();
    Ok((report, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{Provenance, RunConfig, ARTIFACT_FORMAT_VERSION};
    use crate::clustering::ClusterMode;
    use crate::retrieval::RetrievalArtifact;
    use crate::stopping::{BudgetAllocation, TurnBudget};
    use crate::trajectory::{AnswerSample, TurnLog};

    fn config_eta0() -> ClusteringConfig {
        ClusteringConfig {
            mode: ClusterMode::ExactMatch,
            eta: 0.0,
            ..Default::default()
        }
    }

    fn record(id: &str, samples_per_turn: &[&[&str]], golds: &[&str]) -> TrajectoryRecord {
        TrajectoryRecord {
            id: id.to_string(),
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

    fn outcome(id: &str, t_star: usize, last: usize) -> StopOutcome {
        StopOutcome {
            id: id.to_string(),
            t_star,
            early_stopped: t_star < last,
            scores: vec![],
        }
    }

    fn synthetic_cluster(rep: &str, conf: f64) -> Cluster {
        Cluster {
            representative: rep.to_string(),
            members: vec![0],
            frequency: conf.max(0.0),
            penalized_confidence: conf,
        }
    }

    #[test]
    fn gold_confidence_truncates_at_stopping_turn() {
        // Gold frequency 0.6 at turn 0, 0.7 at turn 1 (eta = 0).
        let turn0 = ["g", "g", "g", "g", "g", "g", "a1", "b", "c", "d"];
        let turn1 = ["g", "g", "g", "g", "g", "g", "g", "b", "c", "d"];
        let r = record("r", &[&turn0, &turn1], &["g"]);
        let c = gold_confidence(&r, 1, &config_eta0(), GoldMatcher::NormalizedExact).unwrap();
        assert!((c.unwrap() - 0.7).abs() < 1e-12);
        let c = gold_confidence(&r, 0, &config_eta0(), GoldMatcher::NormalizedExact).unwrap();
        assert!((c.unwrap() - 0.6).abs() < 1e-12);

        let never = record("n", &[&["x", "y"], &["z", "w"]], &["g"]);
        assert_eq!(
            gold_confidence(&never, 1, &config_eta0(), GoldMatcher::NormalizedExact).unwrap(),
            None
        );
    }

    #[test]
    fn freq_threshold_matches_quantile_oracle() {
        // Gold frequencies 0.2, 0.4, 0.6, 0.8, 1.0 over M = 5 samples.
        let records: Vec<_> = (1..=5)
            .map(|k| {
                let texts: Vec<String> = (0..5)
                    .map(|i| if i < k { "g".to_string() } else { format!("d{i}") })
                    .collect();
                let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
                record(&format!("r{k}"), &[&refs], &["g"])
            })
            .collect();
        let outcomes: Vec<_> = records.iter().map(|r| outcome(&r.id, 0, 0)).collect();
        let m = GoldMatcher::NormalizedExact;
        let t = calibrate_freq_threshold(&records, &outcomes, 0.2, &config_eta0(), m).unwrap();
        assert_eq!(t.value, crate::conformal::ThresholdValue::Finite(0.2));

        let t = calibrate_freq_threshold(&records, &outcomes, 0.1, &config_eta0(), m).unwrap();
        assert_eq!(t.value, crate::conformal::ThresholdValue::NegInf);

        let single = &records[2..3];
        let t =
            calibrate_freq_threshold(single, &outcomes[2..3], 0.6, &config_eta0(), m).unwrap();
        assert_eq!(t.value, crate::conformal::ThresholdValue::Finite(0.6));

        // Gold never sampled anywhere -> empty answerable calibration set.
        let unanswerable = vec![record("u", &[&["x", "y"]], &["g"])];
        let o = vec![outcome("u", 0, 0)];
        assert!(calibrate_freq_threshold(&unanswerable, &o, 0.2, &config_eta0(), m).is_err());
    }

    #[test]
    fn set_merges_across_turns_keeping_max_confidence() {
        let per_turn = vec![
            vec![synthetic_cluster("A", 0.6), synthetic_cluster("B", 0.3)],
            vec![synthetic_cluster("A", 0.7), synthetic_cluster("C", 0.55)],
        ];
        let q = Threshold::finite(0.5, 0.1, 10);
        // Stopped early (t* = 1 < last turn 3): no abstention.
        let set = build_prediction_set_from_clusters("r", &per_turn, 1, 3, &q);
        assert!(!set.cant_answer);
        assert_eq!(set.size, 2);
        assert_eq!(set.clusters.len(), 2);
        let a = &set.clusters[0];
        assert_eq!(a.representative, "A");
        assert!((a.penalized_confidence - 0.7).abs() < 1e-12);
        assert_eq!(a.turn, 0);
        assert_eq!(set.clusters[1].representative, "C");
    }

    #[test]
    fn exhausted_records_abstain() {
        let per_turn = vec![
            vec![synthetic_cluster("A", 0.2)],
            vec![synthetic_cluster("B", 0.1)],
        ];
        let q = Threshold::finite(0.5, 0.1, 10);
        let set = build_prediction_set_from_clusters("r", &per_turn, 1, 1, &q);
        assert!(set.cant_answer);
        assert!(set.clusters.is_empty());
        assert_eq!(set.size, 1);
    }

    #[test]
    fn neg_inf_threshold_admits_every_cluster() {
        let r = record("r", &[&["x", "y", "z"]], &["g"]);
        let q = Threshold::neg_inf(0.1, 3);
        let set =
            build_prediction_set(&r, &outcome("r", 0, 0), &q, &config_eta0()).unwrap();
        assert_eq!(set.clusters.len(), 3);
        // Stopped at the final turn, so the abstention label is included.
        assert_eq!(set.size, 4);
    }

    #[test]
    fn lowering_threshold_never_shrinks_sets() {
        let r = record("r", &[&["x", "x", "y", "z"], &["g", "g", "x", "w"]], &["g"]);
        let o = outcome("r", 1, 1);
        let tight = build_prediction_set(&r, &o, &Threshold::finite(0.5, 0.1, 9), &config_eta0())
            .unwrap();
        let loose = build_prediction_set(&r, &o, &Threshold::finite(0.25, 0.1, 9), &config_eta0())
            .unwrap();
        let reps = |s: &PredictionSet| {
            s.clusters
                .iter()
                .map(|e| e.representative.clone())
                .collect::<Vec<_>>()
        };
        for rep in reps(&tight) {
            assert!(reps(&loose).contains(&rep));
        }
        assert!(loose.size >= tight.size);
    }

    fn toy_artifact(q0: f64, q_freq: f64) -> CalibrationArtifact {
        let run_config = RunConfig {
            eta: 0.0,
            ..RunConfig::default()
        };
        let budgets = vec![
            TurnBudget {
                t: 0,
                alpha_t: 0.1,
                q_t: Threshold::finite(q0, 0.1, 4),
                c_ans_t: 0.25,
                n_active: 4,
                n_unanswerable: 3,
                u_empty: false,
            },
            TurnBudget {
                t: 1,
                alpha_t: 0.1,
                q_t: Threshold::pos_inf(0.1, 2),
                c_ans_t: 0.5,
                n_active: 2,
                n_unanswerable: 1,
                u_empty: false,
            },
        ];
        CalibrationArtifact {
            format_version: ARTIFACT_FORMAT_VERSION,
            run_config,
            retrieval: RetrievalArtifact {
                q_ret: Threshold::neg_inf(0.1, 0),
                alpha_ret: 0.1,
                n_gold_scores: 0,
            },
            allocation: BudgetAllocation {
                budgets,
                alpha_total: 0.1,
                c_ans_final: 0.5,
                gamma: 1.0,
                stop_score_mode: StopScoreMode::PenalizedFreq,
            },
            q_freq: Threshold::finite(q_freq, 0.1, 2),
            c_ans_final: 0.5,
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn toy_evaluation_matches_hand_computation() {
        // T = 1, M = 4, eta = 0. Stop at turn 0 when max frequency >= 0.75;
        // admit clusters with frequency >= 0.5.
        //
        // r1: answerable at 0, stops at 0, gold admitted     -> covered
        // r2: answerable at 1, runs to T, gold admitted      -> covered
        // r3: never answerable, stops early                  -> NOT covered
        // r4: never answerable, runs to T, abstains          -> covered
        let test = vec![
            record("r1", &[&["g", "g", "g", "x"], &["g", "g", "g", "g"]], &["g"]),
            record("r2", &[&["x", "x", "y", "z"], &["g", "g", "x", "y"]], &["g"]),
            record("r3", &[&["x", "x", "x", "y"], &["x", "x", "x", "x"]], &["gg"]),
            record("r4", &[&["x", "y", "z", "w"], &["u", "v", "w", "y"]], &["gg"]),
        ];
        let artifact = toy_artifact(0.75, 0.5);
        let (report, rows) = evaluate(&test, &artifact, false).unwrap();

        assert_eq!(report.n_records, 4);
        assert!((report.coverage_rate - 0.75).abs() < 1e-12);
        assert!((report.avg_turns - 0.5).abs() < 1e-12);
        // Sizes: r1 {g} = 1; r2 {x, g} + abstain = 3; r3 {x} = 1; r4 abstain only = 1.
        assert!((report.avg_set_size - 1.5).abs() < 1e-12);
        assert!((report.answer_rate - 0.5).abs() < 1e-12);

        let by_id: std::collections::BTreeMap<&str, &RecordRow> =
            rows.iter().map(|r| (r.id.as_str(), r)).collect();
        assert!(by_id["r1"].covered && !by_id["r1"].cant_answer && by_id["r1"].t_star == 0);
        assert!(by_id["r2"].covered && by_id["r2"].cant_answer && by_id["r2"].t_star == 1);
        assert!(!by_id["r3"].covered && !by_id["r3"].cant_answer && by_id["r3"].t_star == 0);
        assert!(by_id["r4"].covered && by_id["r4"].cant_answer && by_id["r4"].t_star == 1);
        assert_eq!(by_id["r2"].set_size, 3);

        // Tallies: turn 0 gets (corr 1, wrong 1), turn 1 gets (corr 1, wrong 1);
        // test-measured c_ans: turn 0 -> 1/4, turn 1 -> 1/2 among the two
        // still-active records. L = 1.0 * 0.5 - (1/0.25 + 1/0.5) / (1/0.75 + 1/0.5).
        assert_eq!(report.per_turn[0].n_corr, 1);
        assert_eq!(report.per_turn[0].n_wrong, 1);
        assert!((report.per_turn[0].c_ans_t - 0.25).abs() < 1e-12);
        assert!((report.per_turn[1].c_ans_t - 0.5).abs() < 1e-12);
        let expected_l = 0.5 - (1.0 / 0.25 + 1.0 / 0.5) / (1.0 / 0.75 + 1.0 / 0.5);
        assert!((report.composite_l - expected_l).abs() < 1e-9);

        // Parallel evaluation is byte-identical.
        let (report_par, rows_par) = evaluate(&test, &artifact, true).unwrap();
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&report_par).unwrap()
        );
        assert_eq!(rows, rows_par);
    }

    #[test]
    fn maximal_sets_cover_everything() {
        // All-zero budgets (PosInf thresholds) plus a NegInf frequency
        // threshold: every record runs to T, every cluster is admitted, and
        // the abstention label is always present -> coverage 1.
        let mut artifact = toy_artifact(0.75, 0.5);
        for b in &mut artifact.allocation.budgets {
            b.q_t = Threshold::pos_inf(0.0, 0);
        }
        artifact.q_freq = Threshold::neg_inf(0.1, 0);
        let test = vec![
            record("r1", &[&["g", "x"], &["y", "z"]], &["g"]),
            record("r2", &[&["x", "y"], &["z", "w"]], &["gg"]),
        ];
        let (report, rows) = evaluate(&test, &artifact, false).unwrap();
        assert_eq!(report.coverage_rate, 1.0);
        assert!(rows.iter().all(|r| r.cant_answer && r.t_star == 1));
    }

    #[test]
    fn evaluate_rejects_empty_test() {
        let artifact = toy_artifact(0.5, 0.5);
        assert!(evaluate(&[], &artifact, false).is_err());
    }
}
