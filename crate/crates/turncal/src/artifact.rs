//! Run configuration, the persisted calibration artifact, and the pipeline
//! entry points that the CLI (and examples) drive.
//!
//! An artifact bundles everything learned during calibration: the retrieval
//! threshold, the per-turn budget allocation with its stopping thresholds,
//! the answer-admission threshold, and provenance (input digests, seed,
//! tool version). Applying the same artifact to the same inputs reproduces
//! the same report bytes; nothing time- or machine-dependent is stored.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::answer_set::{evaluate, MetricsReport, RecordRow};
use crate::clustering::{ClusterMode, ClusteringConfig};
use crate::conformal::{lower_quantile, Threshold};
use crate::error::{Error, Result};
use crate::retrieval::{calibrate_retrieval, RetrievalArtifact};
use crate::stopping::{fit_head_to_budget, grid_search, sweep_with_derived_final, BudgetAllocation};
use crate::summary::{build_summaries, StopScoreMode};
use crate::trajectory::{GoldMatcher, TrajectoryRecord};

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// All calibration knobs for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Total prediction-set error budget.
    pub alpha: f64,
    /// Retrieval-filter error budget.
    pub alpha_ret: f64,
    /// Entropy penalty weight.
    pub eta: f64,
    /// Turns-versus-quality weight in the composite objective.
    pub gamma: f64,
    /// Grid values per searched dimension.
    pub grid_steps: usize,
    /// Agglomerative merge threshold.
    pub similarity_threshold: f64,
    pub stop_score: StopScoreMode,
    pub cluster_mode: ClusterMode,
    pub gold_matcher: GoldMatcher,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.10,
            alpha_ret: 0.10,
            eta: 0.1,
            gamma: 1.0,
            grid_steps: 20,
            similarity_threshold: 0.9,
            stop_score: StopScoreMode::PenalizedFreq,
            cluster_mode: ClusterMode::Embedding,
            gold_matcher: GoldMatcher::NormalizedExact,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("alpha-ret", self.alpha_ret)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must be in (0, 1), got {v}")));
            }
        }
        if self.grid_steps < 2 {
            return Err(Error::invalid("grid-steps must be at least 2"));
        }
        if !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be finite"));
        }
        self.clustering_config().validate()
    }

    pub fn clustering_config(&self) -> ClusteringConfig {
        ClusteringConfig {
            similarity_threshold: self.similarity_threshold,
            eta: self.eta,
            mode: self.cluster_mode,
        }
    }
}

/// SHA-256 digest and display name of one input file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

/// Where an artifact or report came from. Only content digests and the seed
/// are recorded (no timestamps, no absolute paths) so reruns reproduce
/// byte-identical outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: 0,
            inputs: Vec::new(),
        }
    }
}

impl Provenance {
    pub fn with_seed(seed: u64) -> Self {
        Provenance {
            seed,
            ..Default::default()
        }
    }

    /// Append the digest of a file, named by its basename.
    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.push(InputDigest {
            name,
            sha256: sha256_file(path)?,
        });
        Ok(())
    }
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let bytes = fs::read(path.as_ref())?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// The complete learned calibration state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub format_version: u32,
    pub run_config: RunConfig,
    pub retrieval: RetrievalArtifact,
    pub allocation: BudgetAllocation,
    /// Answer-admission threshold over gold-cluster confidences.
    pub q_freq: Threshold,
    /// Fraction of calibration records whose gold answer is ever sampled.
    pub c_ans_final: f64,
    pub provenance: Provenance,
}

/// How the per-turn budgets are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum BudgetSpec {
    /// Search allocations on a held-out optimization set.
    GridSearch,
    /// Explicit budgets for turns `0..T`; the final turn's budget is derived
    /// from the decomposition at equality.
    Explicit(Vec<f64>),
}

/// Run both calibration stages and assemble the artifact.
///
/// Stage 1 calibrates the retrieval filter on `cal`. Stage 2 selects a
/// budget head (grid search over `opt`, or the explicit head), calibrates
/// per-turn stopping thresholds on `cal` with the final budget re-derived
/// on `cal`'s own answerability statistics, and finally calibrates the
/// answer-admission threshold on the records whose gold answer appeared
/// before stopping.
///
/// `parallel` only controls threading; outputs are identical either way.
pub fn calibrate(
    cal: &[TrajectoryRecord],
    opt: Option<&[TrajectoryRecord]>,
    spec: &BudgetSpec,
    run: &RunConfig,
    provenance: Provenance,
    parallel: bool,
) -> Result<CalibrationArtifact> {
    run.validate()?;
    if cal.is_empty() {
        return Err(Error::invalid("calibration set is empty"));
    }
    let config = run.clustering_config();

    let retrieval = calibrate_retrieval(cal, run.alpha_ret)?;

    let summaries = build_summaries(cal, &config, run.gold_matcher, parallel)?;
    let sweep = match spec {
        BudgetSpec::GridSearch => {
            let opt = opt.ok_or_else(|| {
                Error::invalid("grid search requested but no optimization set was given")
            })?;
            let allocation = grid_search(
                opt,
                run.alpha,
                run.grid_steps,
                run.gamma,
                &config,
                run.stop_score,
                run.gold_matcher,
                parallel,
            )?;
            let mut head = allocation.alphas();
            head.pop();
            // The optimizer tends to spend the whole budget on the
            // optimization set; project its head into the calibration set's
            // feasible region rather than failing on the statistics drift.
            let (_, sweep) = fit_head_to_budget(&summaries, &head, run.alpha, run.stop_score)?;
            sweep
        }
        BudgetSpec::Explicit(head) => {
            sweep_with_derived_final(&summaries, head, run.alpha, run.stop_score)?.ok_or_else(
                || {
                    Error::Infeasible(format!(
                        "per-turn budgets {head:?} overspend the decomposed error budget \
                         sum_t (1 - c_ans_t) * alpha_t <= (1 - c_ans_final) * alpha \
                         on the calibration set"
                    ))
                },
            )?
        }
    };
    let allocation = BudgetAllocation {
        budgets: sweep.budgets,
        alpha_total: run.alpha,
        c_ans_final: sweep.c_ans_final,
        gamma: run.gamma,
        stop_score_mode: run.stop_score,
    };
    allocation.check_budget()?;

    let gold_confs: Vec<f64> = summaries
        .iter()
        .zip(&sweep.t_stars)
        .filter_map(|(s, &t)| s.gold_confidence_by(t))
        .collect();
    if gold_confs.is_empty() {
        return Err(Error::invalid(
            "no calibration record has its gold answer sampled before stopping; \
             cannot calibrate the answer-admission threshold",
        ));
    }
    let q_freq = lower_quantile(&gold_confs, run.alpha)?;

    Ok(CalibrationArtifact {
        format_version: ARTIFACT_FORMAT_VERSION,
        run_config: run.clone(),
        retrieval,
        c_ans_final: allocation.c_ans_final,
        allocation,
        q_freq,
        provenance,
    })
}

/// A persisted evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub metrics: MetricsReport,
    pub provenance: Provenance,
}

/// Evaluate a test set against an artifact, producing the report plus the
/// flat per-record rows for the CSV.
pub fn evaluate_to_report(
    test: &[TrajectoryRecord],
    artifact: &CalibrationArtifact,
    provenance: Provenance,
    parallel: bool,
) -> Result<(EvaluationReport, Vec<RecordRow>)> {
    ensure_artifact_version(artifact.format_version)?;
    let (metrics, rows) = evaluate(test, artifact, parallel)?;
    Ok((
        EvaluationReport {
            format_version: REPORT_FORMAT_VERSION,
            metrics,
            provenance,
        },
        rows,
    ))
}

/// One row of a sweep over target error rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub coverage_rate: f64,
    pub gold_retention_rate: f64,
    pub avg_turns: f64,
    pub avg_set_size: f64,
    pub answer_rate: f64,
    pub composite_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub format_version: u32,
    pub rows: Vec<SweepRow>,
    pub provenance: Provenance,
}

/// Repeat calibrate + evaluate for each target error rate.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    opt: Option<&[TrajectoryRecord]>,
    cal: &[TrajectoryRecord],
    test: &[TrajectoryRecord],
    alphas: &[f64],
    spec: &BudgetSpec,
    run: &RunConfig,
    provenance: Provenance,
    parallel: bool,
) -> Result<SweepReport> {
    if alphas.is_empty() {
        return Err(Error::invalid("sweep needs at least one alpha"));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let run_alpha = RunConfig {
            alpha,
            ..run.clone()
        };
        let artifact = calibrate(
            cal,
            opt,
            spec,
            &run_alpha,
            Provenance::with_seed(run.seed),
            parallel,
        )?;
        let (metrics, _) = evaluate(test, &artifact, parallel)?;
        rows.push(SweepRow {
            alpha,
            coverage_rate: metrics.coverage_rate,
            gold_retention_rate: metrics.gold_retention_rate,
            avg_turns: metrics.avg_turns,
            avg_set_size: metrics.avg_set_size,
            answer_rate: metrics.answer_rate,
            composite_l: metrics.composite_l,
        });
    }
    Ok(SweepReport {
        format_version: REPORT_FORMAT_VERSION,
        rows,
        provenance,
    })
}

fn ensure_artifact_version(found: u32) -> Result<()> {
    if found != ARTIFACT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: ARTIFACT_FORMAT_VERSION,
            found,
        });
    }
    Ok(())
}

/// Serialize an artifact to pretty JSON.
pub fn artifact_to_json(artifact: &CalibrationArtifact) -> Result<String> {
    serde_json::to_string_pretty(artifact)
        .map_err(|e| Error::invalid(format!("serialize artifact: {e}")))
}

pub fn save_artifact(artifact: &CalibrationArtifact, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), artifact_to_json(artifact)? + "\n")?;
    Ok(())
}

/// Load an artifact, refusing mismatched format versions before decoding
/// the full structure.
pub fn load_artifact(path: impl AsRef<Path>) -> Result<CalibrationArtifact> {
    let text = fs::read_to_string(path.as_ref())?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::schema("artifact has no format_version field"))?;
    ensure_artifact_version(found as u32)?;
    serde_json::from_value(value).map_err(|e| Error::schema(format!("decode artifact: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_trajectories, SimConfig};
    use crate::trajectory::split_dataset;

    fn sim_records(n: usize, seed: u64) -> Vec<TrajectoryRecord> {
        let config = SimConfig {
            n_records: n,
            seed,
            ..Default::default()
        };
        generate_trajectories(&config, false).unwrap().0
    }

    fn quick_run() -> RunConfig {
        RunConfig {
            grid_steps: 3,
            ..Default::default()
        }
    }

    #[test]
    fn calibrate_with_explicit_budgets_and_roundtrip() {
        let records = sim_records(300, 21);
        let run = quick_run();
        let artifact = calibrate(
            &records,
            None,
            &BudgetSpec::Explicit(vec![0.01, 0.01, 0.0]),
            &run,
            Provenance::with_seed(run.seed),
            false,
        )
        .unwrap();
        artifact.allocation.check_budget().unwrap();
        assert_eq!(artifact.allocation.budgets.len(), 4);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.json");
        save_artifact(&artifact, &path).unwrap();
        let loaded = load_artifact(&path).unwrap();
        assert_eq!(artifact, loaded);
        // Saving the loaded artifact again is byte-identical.
        let again = dir.path().join("artifact2.json");
        save_artifact(&loaded, &again).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn load_rejects_version_mismatch() {
        let records = sim_records(200, 22);
        let run = quick_run();
        let mut artifact = calibrate(
            &records,
            None,
            &BudgetSpec::Explicit(vec![0.0, 0.0, 0.0]),
            &run,
            Provenance::default(),
            false,
        )
        .unwrap();
        artifact.format_version = 99;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.json");
        save_artifact(&artifact, &path).unwrap();
        let err = load_artifact(&path).unwrap_err();
        assert!(matches!(err, Error::VersionMismatch { found: 99, .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn overspent_budgets_are_rejected_with_constraint_message() {
        let records = sim_records(200, 23);
        let run = quick_run();
        let err = calibrate(
            &records,
            None,
            &BudgetSpec::Explicit(vec![0.9, 0.9, 0.9]),
            &run,
            Provenance::default(),
            false,
        )
        .unwrap_err();
        match err {
            Error::Infeasible(msg) => assert!(msg.contains("c_ans"), "{msg}"),
            other => panic!("expected Infeasible, got {other}"),
        }
    }

    #[test]
    fn gridsearch_requires_opt_set() {
        let records = sim_records(100, 24);
        let err = calibrate(
            &records,
            None,
            &BudgetSpec::GridSearch,
            &quick_run(),
            Provenance::default(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn full_pipeline_reports_reasonable_coverage() {
        let records = sim_records(900, 25);
        let split = split_dataset(records, 7, (300, 300, 300)).unwrap();
        let run = quick_run();
        let artifact = calibrate(
            &split.cal,
            Some(&split.opt),
            &BudgetSpec::GridSearch,
            &run,
            Provenance::default(),
            true,
        )
        .unwrap();
        let (report, rows) =
            evaluate_to_report(&split.test, &artifact, Provenance::default(), true).unwrap();
        assert_eq!(rows.len(), 300);
        assert!(report.metrics.coverage_rate >= 1.0 - run.alpha - 0.08);
        assert!(report.metrics.avg_turns <= 3.0);
        assert!(report.metrics.gold_retention_rate >= 1.0 - run.alpha_ret - 0.08);
    }

    #[test]
    fn tightening_alpha_never_lowers_coverage_on_fixed_test() {
        // With stopping held fixed (zero budgets), a smaller alpha only
        // lowers the admission threshold, so sets grow and coverage rises.
        let records = sim_records(600, 27);
        let (cal, test) = records.split_at(300);
        let mut coverages = Vec::new();
        for alpha in [0.25, 0.05] {
            let run = RunConfig {
                alpha,
                ..quick_run()
            };
            let artifact = calibrate(
                cal,
                None,
                &BudgetSpec::Explicit(vec![0.0, 0.0, 0.0]),
                &run,
                Provenance::default(),
                false,
            )
            .unwrap();
            let (metrics, _) = crate::answer_set::evaluate(test, &artifact, false).unwrap();
            coverages.push(metrics.coverage_rate);
        }
        assert!(coverages[1] >= coverages[0], "{coverages:?}");
    }

    #[test]
    fn neg_entropy_mode_runs_the_full_pipeline() {
        let records = sim_records(900, 28);
        let split = split_dataset(records, 9, (300, 300, 300)).unwrap();
        let run = RunConfig {
            stop_score: StopScoreMode::NegEntropy,
            grid_steps: 4,
            ..Default::default()
        };
        let artifact = calibrate(
            &split.cal,
            Some(&split.opt),
            &BudgetSpec::GridSearch,
            &run,
            Provenance::default(),
            true,
        )
        .unwrap();
        assert_eq!(artifact.allocation.stop_score_mode, StopScoreMode::NegEntropy);
        let (metrics, _) = crate::answer_set::evaluate(&split.test, &artifact, true).unwrap();
        assert!(metrics.coverage_rate >= 1.0 - run.alpha - 0.08);
    }

    #[test]
    fn looser_alpha_stops_earlier_with_smaller_sets_on_easy_data() {
        let config = crate::simulator::SimConfig {
            n_records: 2100,
            seed: 31,
            first_answerable_turn_probs: vec![0.6, 0.2, 0.0, 0.0, 0.2],
            ..Default::default()
        };
        let records = crate::simulator::generate_trajectories(&config, true).unwrap().0;
        let split = split_dataset(records, 11, (300, 600, 1200)).unwrap();
        let run = RunConfig {
            grid_steps: 6,
            ..Default::default()
        };
        let report = sweep(
            Some(&split.opt),
            &split.cal,
            &split.test,
            &[0.5, 0.05],
            &BudgetSpec::GridSearch,
            &run,
            Provenance::default(),
            true,
        )
        .unwrap();
        let loose = &report.rows[0];
        let tight = &report.rows[1];
        assert!(
            loose.avg_turns < tight.avg_turns,
            "looser target should stop earlier: {} vs {}",
            loose.avg_turns,
            tight.avg_turns
        );
        assert!(
            loose.avg_set_size <= tight.avg_set_size,
            "looser target should emit smaller sets: {} vs {}",
            loose.avg_set_size,
            tight.avg_set_size
        );
    }

    #[test]
    fn sweep_produces_one_row_per_alpha() {
        let records = sim_records(600, 26);
        let split = split_dataset(records, 7, (200, 200, 200)).unwrap();
        let run = quick_run();
        let report = sweep(
            Some(&split.opt),
            &split.cal,
            &split.test,
            &[0.25, 0.1],
            &BudgetSpec::GridSearch,
            &run,
            Provenance::default(),
            true,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].alpha > report.rows[1].alpha);
    }
}
