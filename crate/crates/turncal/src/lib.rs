//! turncal: conformal calibration for multi-turn QA trajectory logs.
//!
//! Multi-turn pipelines (adaptive retrieval, tool-using agents) answer a
//! question over several retrieve-and-answer rounds and must decide when to
//! stop. This crate calibrates that decision with distribution-free
//! guarantees on recorded or synthetic trajectory logs:
//!
//! 1. **Retrieval filtering** ([`retrieval`]): a conformal threshold over
//!    optimistic gold-passage scores keeps at least a `1 - alpha_ret`
//!    fraction of retrievable gold evidence while pruning low-relevance
//!    passages.
//! 2. **Budgeted early stopping** ([`stopping`]): the total error budget is
//!    decomposed across turns, each turn gets a conformal stop threshold
//!    fit on the unanswerable records still active there, and a grid search
//!    picks the allocation minimizing a composite turns-versus-quality
//!    objective.
//! 3. **Prediction sets with abstention** ([`answer_set`]): answer clusters
//!    above a calibrated confidence threshold form the final set; records
//!    that exhaust all turns append a "Can't Answer" label so coverage also
//!    holds for never-answerable questions.
//!
//! The [`simulator`] generates exchangeable synthetic logs with known
//! ground truth, which the test suite uses to verify the coverage
//! guarantees empirically. The `turncal` binary wires everything into
//! `simulate`, `split`, `calibrate`, `evaluate`, and `sweep` subcommands;
//! the `examples/` directory shows each capability through the library API.

pub mod answer_set;
pub mod artifact;
pub mod cli;
pub mod clustering;
pub mod conformal;
pub mod error;
pub mod retrieval;
pub mod simulator;
pub mod stopping;
pub mod summary;
pub mod trajectory;

pub use answer_set::{MetricsReport, PredictionSet, RecordRow};
pub use artifact::{BudgetSpec, CalibrationArtifact, Provenance, RunConfig};
pub use clustering::{Cluster, ClusterMode, ClusteringConfig};
pub use conformal::{lower_quantile, upper_quantile, Threshold, ThresholdValue};
pub use error::{Error, Result};
pub use simulator::SimConfig;
pub use stopping::{BudgetAllocation, StopOutcome, TurnBudget, TurnTally};
pub use summary::StopScoreMode;
pub use trajectory::{DatasetSplit, GoldMatcher, TrajectoryRecord};
