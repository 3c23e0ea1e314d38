//! Synthetic trajectory generation with known ground truth.
//!
//! Records are generated i.i.d., so calibration and test splits are
//! exchangeable by construction and the coverage guarantees can be checked
//! empirically against the configured error levels. Each record draws a
//! latent "first answerable turn" (possibly never); from that turn on, the
//! sampled-answer distribution places configurable mass on the gold token.
//! Answers carry one-hot embeddings, so embedding clustering and exact-match
//! clustering agree and calibration behavior is isolated from embedding
//! noise.
//!
//! Every record is generated from its own deterministic RNG stream derived
//! from `(seed, record index)`, so parallel and serial generation emit
//! byte-identical logs.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{AnswerSample, PassageHit, TrajectoryRecord, TurnLog};

/// RNG scheme identifier recorded in the ground-truth sidecar.
pub const GENERATOR_ID: &str = "chacha8-per-record-streams/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_records: usize,
    /// Highest turn index; records carry `max_turn + 1` turns.
    pub max_turn: usize,
    /// Answer samples per turn.
    pub samples_per_turn: usize,
    /// Retrieved passages per turn.
    pub passages_per_turn: usize,
    /// Probability of the gold answer first becoming sampleable at turn
    /// 0, 1, ..., `max_turn`, with one trailing entry for "never". Length
    /// `max_turn + 2`, sums to 1.
    pub first_answerable_turn_probs: Vec<f64>,
    /// Weight of the gold token relative to weight-1 distractors once the
    /// record is answerable. Larger means more concentrated samples.
    pub concentration_answerable: f64,
    /// Weight of one randomly chosen "attractor" distractor while the record
    /// is unanswerable. Larger makes unanswerable turns look confident.
    pub concentration_unanswerable: f64,
    pub gold_score_mean: f64,
    pub gold_score_sd: f64,
    pub distractor_score_mean: f64,
    pub distractor_score_sd: f64,
    /// Per-turn probability that the record's gold passage appears in the
    /// retrieval list.
    pub gold_retrievable_prob: f64,
    /// Number of distinct answer tokens (including the gold token).
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_records: 1000,
            max_turn: 3,
            samples_per_turn: 15,
            passages_per_turn: 10,
            first_answerable_turn_probs: vec![0.35, 0.2, 0.15, 0.1, 0.2],
            concentration_answerable: 60.0,
            concentration_unanswerable: 6.0,
            gold_score_mean: 2.0,
            gold_score_sd: 1.0,
            distractor_score_mean: 0.0,
            distractor_score_sd: 1.0,
            gold_retrievable_prob: 0.85,
            vocab_size: 20,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::invalid("n_records must be positive"));
        }
        if self.samples_per_turn == 0 || self.passages_per_turn == 0 {
            return Err(Error::invalid("samples and passages per turn must be positive"));
        }
        if self.vocab_size < 2 {
            return Err(Error::invalid("vocab_size must be at least 2"));
        }
        let want = self.max_turn + 2;
        if self.first_answerable_turn_probs.len() != want {
            return Err(Error::invalid(format!(
                "first_answerable_turn_probs needs {want} entries (turns 0..={} plus never), got {}",
                self.max_turn,
                self.first_answerable_turn_probs.len()
            )));
        }
        if self
            .first_answerable_turn_probs
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::invalid("answerable-turn probabilities must lie in [0, 1]"));
        }
        let sum: f64 = self.first_answerable_turn_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "answerable-turn probabilities sum to {sum}, expected 1"
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.gold_score_sd) || !positive(self.distractor_score_sd) {
            return Err(Error::invalid("score standard deviations must be positive"));
        }
        if !positive(self.concentration_answerable) || !positive(self.concentration_unanswerable) {
            return Err(Error::invalid("concentrations must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gold_retrievable_prob) {
            return Err(Error::invalid("gold_retrievable_prob must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Stopping turn of an oracle that stops exactly when the gold first
    /// becomes sampleable (never-answerable records run all turns).
    pub fn oracle_expected_stop_turn(&self) -> f64 {
        self.first_answerable_turn_probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * (k.min(self.max_turn)) as f64)
            .sum()
    }
}

/// Latent ground truth for one simulated record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub id: String,
    /// `None` = the gold answer is never sampleable.
    pub first_answerable_turn: Option<usize>,
}

/// Sidecar file accompanying a simulated log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub generator: String,
    pub seed: u64,
    pub records: Vec<GroundTruthRow>,
}

fn token_text(tok: usize) -> String {
    format!("w{tok}")
}

fn one_hot(dim: usize, hot: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[hot] = 1.0;
    v
}

fn generate_record(config: &SimConfig, index: usize) -> (TrajectoryRecord, GroundTruthRow) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);

    let vocab = config.vocab_size;
    let gold_tok = rng.random_range(0..vocab);
    let turn_dist = WeightedIndex::new(&config.first_answerable_turn_probs)
        .expect("validated probability vector");
    let drawn = turn_dist.sample(&mut rng);
    let first_answerable = (drawn <= config.max_turn).then_some(drawn);

    let gold_normal = Normal::new(config.gold_score_mean, config.gold_score_sd)
        .expect("validated sd");
    let distractor_normal =
        Normal::new(config.distractor_score_mean, config.distractor_score_sd)
            .expect("validated sd");

    let id = format!("r{index:06}");
    let mut turns = Vec::with_capacity(config.max_turn + 1);
    for t in 0..=config.max_turn {
        let mut passages = Vec::with_capacity(config.passages_per_turn);
        let gold_retrieved = rng.random_bool(config.gold_retrievable_prob);
        if gold_retrieved {
            passages.push(PassageHit {
                pid: format!("g{index:06}"),
                score: gold_normal.sample(&mut rng),
                is_gold: true,
            });
        }
        while passages.len() < config.passages_per_turn {
            passages.push(PassageHit {
                pid: format!("d{index:06}-{t}-{}", passages.len()),
                score: distractor_normal.sample(&mut rng),
                is_gold: false,
            });
        }
        passages.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.pid.cmp(&b.pid)));

        let answerable = first_answerable.is_some_and(|a| a <= t);
        let mut weights = vec![1.0f64; vocab];
        if answerable {
            weights[gold_tok] = config.concentration_answerable;
        } else {
            weights[gold_tok] = 0.0;
            // One random distractor dominates, so unanswerable turns can
            // still look confident.
            let offset = rng.random_range(0..vocab - 1);
            let attractor = if offset >= gold_tok { offset + 1 } else { offset };
            weights[attractor] = config.concentration_unanswerable;
        }
        let answer_dist = WeightedIndex::new(&weights).expect("nonzero weights");
        let samples: Vec<AnswerSample> = (0..config.samples_per_turn)
            .map(|_| {
                let tok = answer_dist.sample(&mut rng);
                AnswerSample {
                    text: token_text(tok),
                    embedding: Some(one_hot(vocab, tok)),
                }
            })
            .collect();
        turns.push(TurnLog {
            t,
            passages,
            samples,
        });
    }
    let record = TrajectoryRecord {
        id: id.clone(),
        question: format!("synthetic question {index}"),
        gold_answers: vec![token_text(gold_tok)],
        turns,
    };
    let truth = GroundTruthRow {
        id,
        first_answerable_turn: first_answerable,
    };
    (record, truth)
}

/// Generate an exchangeable synthetic trajectory log plus its ground-truth
/// sidecar. Parallel and serial generation produce identical output.
pub fn generate_trajectories(
    config: &SimConfig,
    parallel: bool,
) -> Result<(Vec<TrajectoryRecord>, GroundTruth)> {
    config.validate()?;
    let pairs: Vec<(TrajectoryRecord, GroundTruthRow)> = if parallel {
        (0..config.n_records)
            .into_par_iter()
            .map(|i| generate_record(config, i))
            .collect()
    } else {
        (0..config.n_records)
            .map(|i| generate_record(config, i))
            .collect()
    };
    let mut records = Vec::with_capacity(pairs.len());
    let mut rows = Vec::with_capacity(pairs.len());
    for (record, row) in pairs {
        records.push(record);
        rows.push(row);
    }
    Ok((
        records,
        GroundTruth {
            generator: GENERATOR_ID.to_string(),
            seed: config.seed,
            records: rows,
        },
    ))
}
