//! Command-line interface: `simulate`, `split`, `calibrate`, `evaluate`,
//! and `sweep` subcommands over JSONL trajectory logs.
//!
//! Precedence for calibration knobs: built-in defaults, then command-line
//! flags, then the `--config` file (the config file wins, so a pinned file
//! fully determines a run regardless of stray flags).
//!
//! Exit codes: 0 success, 1 general/IO error, 2 parse or schema error,
//! 3 infeasible budget, 4 artifact format-version mismatch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::artifact::{
    calibrate, evaluate_to_report, load_artifact, save_artifact, sweep, BudgetSpec, Provenance,
    RunConfig,
};
use crate::answer_set::RecordRow;
use crate::error::{Error, Result};
use crate::simulator::{generate_trajectories, SimConfig};
use crate::summary::StopScoreMode;
use crate::trajectory::{read_trajectory_file, split_dataset, write_trajectory_file};

#[derive(Parser)]
#[command(
    name = "turncal",
    version,
    about = "Conformal calibration for multi-turn QA trajectory logs"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trajectory log with a ground-truth sidecar.
    Simulate {
        /// Simulation config file (JSON; missing fields take defaults).
        #[arg(long)]
        config: PathBuf,
        /// Output log path (JSONL).
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar path (defaults to <out>.truth.json).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Override the config file's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Generate single-threaded.
        #[arg(long)]
        serial: bool,
    },
    /// Shuffle a log and slice it into optimization/calibration/test parts.
    Split {
        /// Input log (JSONL).
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        /// Part sizes as "n_opt,n_cal,n_test".
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <prefix>.opt.jsonl, .cal.jsonl, .test.jsonl.
        #[arg(long)]
        out_prefix: String,
    },
    /// Calibrate retrieval, stopping, and answer-set thresholds.
    Calibrate {
        /// Calibration log (JSONL).
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        /// Optimization log for --gridsearch.
        #[arg(long)]
        opt: Option<PathBuf>,
        /// Grid-search the per-turn budget allocation on --opt.
        #[arg(long)]
        gridsearch: bool,
        /// Explicit per-turn budgets "a0,a1,..." for turns 0..T
        /// (the final turn's budget is derived).
        #[arg(long, conflicts_with = "gridsearch")]
        budgets: Option<String>,
        /// Output artifact path (JSON).
        #[arg(long)]
        artifact: PathBuf,
        #[command(flatten)]
        knobs: ConfigKnobs,
    },
    /// Apply an artifact to a test log and write the metrics report + CSV.
    Evaluate {
        /// Test log (JSONL).
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        /// Report path (JSON).
        #[arg(long)]
        report: PathBuf,
        /// Per-record CSV path (defaults to the report path with .csv).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Run single-threaded.
        #[arg(long)]
        serial: bool,
    },
    /// Calibrate and evaluate across a list of target error rates.
    Sweep {
        /// Test log (JSONL).
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        /// Calibration log (JSONL).
        #[arg(long)]
        cal: PathBuf,
        /// Optimization log (JSONL); enables grid search per alpha.
        #[arg(long)]
        opt: Option<PathBuf>,
        /// Explicit per-turn budgets instead of grid search.
        #[arg(long)]
        budgets: Option<String>,
        /// Comma-separated alphas, e.g. "0.05,0.1,0.15,0.2,0.25".
        #[arg(long)]
        alphas: String,
        /// Sweep report path (JSON).
        #[arg(long)]
        report: PathBuf,
        /// Sweep table CSV path (defaults to the report path with .csv).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        knobs: ConfigKnobs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StopScoreArg {
    PenalizedFreq,
    NegEntropy,
}

impl From<StopScoreArg> for StopScoreMode {
    fn from(value: StopScoreArg) -> Self {
        match value {
            StopScoreArg::PenalizedFreq => StopScoreMode::PenalizedFreq,
            StopScoreArg::NegEntropy => StopScoreMode::NegEntropy,
        }
    }
}

/// Calibration knobs shared by `calibrate` and `sweep`.
#[derive(Args)]
struct ConfigKnobs {
    /// Total prediction-set error budget.
    #[arg(long)]
    alpha: Option<f64>,
    /// Retrieval error budget.
    #[arg(long)]
    alpha_ret: Option<f64>,
    /// Entropy penalty weight.
    #[arg(long)]
    eta: Option<f64>,
    /// Efficiency weight in the composite objective.
    #[arg(long)]
    gamma: Option<f64>,
    /// Grid values per searched budget dimension.
    #[arg(long)]
    grid_steps: Option<usize>,
    /// Agglomerative merge threshold.
    #[arg(long)]
    similarity_threshold: Option<f64>,
    /// Stopping-score definition.
    #[arg(long, value_enum)]
    stop_score: Option<StopScoreArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run single-threaded.
    #[arg(long)]
    serial: bool,
    /// Run-config file (JSON); values set there override flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Optional overlay of RunConfig fields, as read from a config file.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfigOverlay {
    alpha: Option<f64>,
    alpha_ret: Option<f64>,
    eta: Option<f64>,
    gamma: Option<f64>,
    grid_steps: Option<usize>,
    similarity_threshold: Option<f64>,
    stop_score: Option<StopScoreMode>,
    cluster_mode: Option<crate::clustering::ClusterMode>,
    gold_matcher: Option<crate::trajectory::GoldMatcher>,
    seed: Option<u64>,
}

impl ConfigKnobs {
    /// Resolve (config, parallel): defaults, then flags, then config file.
    fn resolve(&self) -> Result<(RunConfig, bool)> {
        let mut run = RunConfig::default();
        macro_rules! flag {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    run.$field = v;
                }
            };
        }
        flag!(alpha);
        flag!(alpha_ret);
        flag!(eta);
        flag!(gamma);
        flag!(grid_steps);
        flag!(similarity_threshold);
        flag!(seed);
        if let Some(mode) = self.stop_score {
            run.stop_score = mode.into();
        }
        if let Some(path) = &self.config {
            let overlay: RunConfigOverlay = read_json(path)?;
            macro_rules! overlay {
                ($field:ident) => {
                    if let Some(v) = overlay.$field {
                        run.$field = v;
                    }
                };
            }
            overlay!(alpha);
            overlay!(alpha_ret);
            overlay!(eta);
            overlay!(gamma);
            overlay!(grid_steps);
            overlay!(similarity_threshold);
            overlay!(stop_score);
            overlay!(cluster_mode);
            overlay!(gold_matcher);
            overlay!(seed);
        }
        run.validate()?;
        Ok((run, !self.serial))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: format!("{}: {e}", path.display()),
    })
}

fn parse_float_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad {what} value {s:?}: {e}")))
        })
        .collect()
}

fn budget_spec(gridsearch: bool, budgets: &Option<String>) -> Result<BudgetSpec> {
    match (gridsearch, budgets) {
        (true, _) => Ok(BudgetSpec::GridSearch),
        (false, Some(list)) => Ok(BudgetSpec::Explicit(parse_float_list(list, "budget")?)),
        (false, None) => Err(Error::invalid(
            "choose either --gridsearch (with --opt) or --budgets \"a0,a1,...\"",
        )),
    }
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut out = path.to_path_buf();
    out.set_extension(ext);
    out
}

fn write_rows_csv(rows: &[RecordRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::invalid(format!("open {}: {e}", path.display())))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::invalid(format!("write csv row: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::invalid(format!("flush csv: {e}")))?;
    Ok(())
}

fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("serialize report: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            out,
            truth,
            seed,
            serial,
        } => {
            let mut sim: SimConfig = read_json(&config)?;
            if let Some(seed) = seed {
                sim.seed = seed;
            }
            let (records, ground_truth) = generate_trajectories(&sim, !serial)?;
            write_trajectory_file(&records, &out)?;
            let truth_path = truth.unwrap_or_else(|| with_extension(&out, "truth.json"));
            write_json_file(&ground_truth, &truth_path)?;
            eprintln!(
                "wrote {} records to {} (ground truth: {})",
                records.len(),
                out.display(),
                truth_path.display()
            );
        }
        Command::Split {
            r#in,
            sizes,
            seed,
            out_prefix,
        } => {
            let nums = parse_float_list(&sizes, "size")?;
            if nums.len() != 3 || nums.iter().any(|n| n.fract() != 0.0 || *n < 0.0) {
                return Err(Error::invalid(
                    "--sizes must be three nonnegative integers \"n_opt,n_cal,n_test\"",
                ));
            }
            let records = read_trajectory_file(&r#in)?;
            let split = split_dataset(
                records,
                seed,
                (nums[0] as usize, nums[1] as usize, nums[2] as usize),
            )?;
            for (part, records) in [
                ("opt", &split.opt),
                ("cal", &split.cal),
                ("test", &split.test),
            ] {
                let path = PathBuf::from(format!("{out_prefix}.{part}.jsonl"));
                write_trajectory_file(records, &path)?;
                eprintln!("wrote {} records to {}", records.len(), path.display());
            }
        }
        Command::Calibrate {
            r#in,
            opt,
            gridsearch,
            budgets,
            artifact,
            knobs,
        } => {
            let (run, parallel) = knobs.resolve()?;
            let spec = budget_spec(gridsearch, &budgets)?;
            let cal = read_trajectory_file(&r#in)?;
            let opt_records = opt.as_ref().map(read_trajectory_file).transpose()?;
            let mut provenance = Provenance::with_seed(run.seed);
            provenance.add_input(&r#in)?;
            if let Some(path) = &opt {
                provenance.add_input(path)?;
            }
            let result = calibrate(&cal, opt_records.as_deref(), &spec, &run, provenance, parallel)?;
            save_artifact(&result, &artifact)?;
            eprintln!(
                "calibrated on {} records; artifact written to {}",
                cal.len(),
                artifact.display()
            );
        }
        Command::Evaluate {
            r#in,
            artifact,
            report,
            csv,
            serial,
        } => {
            let loaded = load_artifact(&artifact)?;
            let test = read_trajectory_file(&r#in)?;
            let mut provenance = Provenance::with_seed(loaded.run_config.seed);
            provenance.add_input(&r#in)?;
            provenance.add_input(&artifact)?;
            let (result, rows) = evaluate_to_report(&test, &loaded, provenance, !serial)?;
            write_json_file(&result, &report)?;
            let csv_path = csv.unwrap_or_else(|| with_extension(&report, "csv"));
            write_rows_csv(&rows, &csv_path)?;
            eprintln!(
                "coverage {:.4}, retention {:.4}, avg turns {:.3}, avg set size {:.3} \
                 ({} records; report {}, rows {})",
                result.metrics.coverage_rate,
                result.metrics.gold_retention_rate,
                result.metrics.avg_turns,
                result.metrics.avg_set_size,
                result.metrics.n_records,
                report.display(),
                csv_path.display()
            );
        }
        Command::Sweep {
            r#in,
            cal,
            opt,
            budgets,
            alphas,
            report,
            csv,
            knobs,
        } => {
            let (run, parallel) = knobs.resolve()?;
            let alphas = parse_float_list(&alphas, "alpha")?;
            let spec = match &budgets {
                Some(list) => BudgetSpec::Explicit(parse_float_list(list, "budget")?),
                None => BudgetSpec::GridSearch,
            };
            if matches!(spec, BudgetSpec::GridSearch) && opt.is_none() {
                return Err(Error::invalid(
                    "sweep grid search needs --opt (or pass --budgets)",
                ));
            }
            let cal_records = read_trajectory_file(&cal)?;
            let test_records = read_trajectory_file(&r#in)?;
            let opt_records = opt.as_ref().map(read_trajectory_file).transpose()?;
            let mut provenance = Provenance::with_seed(run.seed);
            provenance.add_input(&r#in)?;
            provenance.add_input(&cal)?;
            if let Some(path) = &opt {
                provenance.add_input(path)?;
            }
            let result = sweep(
                opt_records.as_deref(),
                &cal_records,
                &test_records,
                &alphas,
                &spec,
                &run,
                provenance,
                parallel,
            )?;
            write_json_file(&result, &report)?;
            let csv_path = csv.unwrap_or_else(|| with_extension(&report, "csv"));
            let mut writer = csv::Writer::from_path(&csv_path)
                .map_err(|e| Error::invalid(format!("open {}: {e}", csv_path.display())))?;
            for row in &result.rows {
                writer
                    .serialize(row)
                    .map_err(|e| Error::invalid(format!("write csv row: {e}")))?;
            }
            writer
                .flush()
                .map_err(|e| Error::invalid(format!("flush csv: {e}")))?;
            for row in &result.rows {
                eprintln!(
                    "alpha {:.3}: coverage {:.4}, retention {:.4}, avg turns {:.3}, \
                     set size {:.3}, answer rate {:.3}, L {:.4}",
                    row.alpha,
                    row.coverage_rate,
                    row.gold_retention_rate,
                    row.avg_turns,
                    row.avg_set_size,
                    row.answer_rate,
                    row.composite_l
                );
            }
        }
    }
    Ok(())
}

/// Parse arguments and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
