//! Trajectory log data model: multi-turn QA records, answer normalization
//! and gold matching, deterministic dataset splitting, and JSONL ingestion.
//!
//! A record captures one question's full multi-turn trace: for every turn,
//! the retrieved passages with relevance scores and the sampled answers.
//! Turn 0 is the answer attempt from the initial context; a record with
//! `max_turn() == T` holds `T + 1` turns.
//!
//! Log format (one JSON object per line, UTF-8, unknown fields ignored):
//!
//! ```json
//! {"id": "q1", "question": "...", "gold_answers": ["..."],
//!  "turns": [{"t": 0,
//!             "passages": [{"pid": "p3", "score": 1.25, "is_gold": true}],
//!             "samples": [{"text": "paris", "embedding": [0.0, 1.0]}]}]}
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One retrieved passage with its retriever relevance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageHit {
    pub pid: String,
    /// Retriever relevance score, unitless; any finite real.
    pub score: f64,
    /// Whether this passage is annotated as supporting the gold answer.
    pub is_gold: bool,
}

/// One sampled answer, optionally with a precomputed embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSample {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

/// Passages and sampled answers for a single turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnLog {
    pub t: usize,
    pub passages: Vec<PassageHit>,
    pub samples: Vec<AnswerSample>,
}

/// One question's full multi-turn log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub turns: Vec<TurnLog>,
}

impl TrajectoryRecord {
    /// Highest turn index (records hold `max_turn() + 1` turns).
    pub fn max_turn(&self) -> usize {
        self.turns.len().saturating_sub(1)
    }

    /// Samples drawn per turn (constant across turns by invariant).
    pub fn samples_per_turn(&self) -> usize {
        self.turns.first().map_or(0, |t| t.samples.len())
    }

    /// First turn index at which some sample matches a gold answer.
    pub fn first_gold_turn(&self, matcher: GoldMatcher) -> Option<usize> {
        self.turns.iter().position(|turn| {
            turn.samples
                .iter()
                .any(|s| matcher.matches(&s.text, &self.gold_answers))
        })
    }

    /// True when some sample in turns `0..=t` matches a gold answer.
    pub fn gold_sampled_by(&self, t: usize, matcher: GoldMatcher) -> bool {
        self.first_gold_turn(matcher).is_some_and(|f| f <= t)
    }
}

/// How sampled answers are compared against gold answers.
///
/// Everything downstream (answerability sets, gold-cluster confidences,
/// coverage) is defined through this predicate, so it is a configuration
/// point rather than a hard-coded rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoldMatcher {
    /// Normalized exact match (the default QA convention).
    #[default]
    NormalizedExact,
    /// Normalized substring containment in either direction.
    NormalizedContains,
}

impl GoldMatcher {
    pub fn matches(&self, answer: &str, golds: &[String]) -> bool {
        let a = normalize_answer(answer);
        golds.iter().any(|g| {
            let g = normalize_answer(g);
            match self {
                GoldMatcher::NormalizedExact => a == g,
                GoldMatcher::NormalizedContains => {
                    !a.is_empty() && !g.is_empty() && (a.contains(&g) || g.contains(&a))
                }
            }
        })
    }
}

/// Normalize an answer string for equality testing: lowercase, strip
/// punctuation, drop leading articles ("a", "an", "the"), collapse
/// whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let unpunct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    let mut tokens: Vec<&str> = unpunct.split_whitespace().collect();
    while let Some(first) = tokens.first() {
        if matches!(*first, "a" | "an" | "the") {
            tokens.remove(0);
        } else {
            break;
        }
    }
    tokens.join(" ")
}

/// True iff `answer` equals some gold answer after normalization.
pub fn matches_gold(answer: &str, golds: &[String]) -> Result<bool> {
    if golds.is_empty() {
        return Err(Error::invalid("gold answer list is empty"));
    }
    Ok(GoldMatcher::NormalizedExact.matches(answer, golds))
}

/// A disjoint optimization / calibration / test partition of a dataset.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub opt: Vec<TrajectoryRecord>,
    pub cal: Vec<TrajectoryRecord>,
    pub test: Vec<TrajectoryRecord>,
    pub seed: u64,
}

/// Seeded uniform shuffle followed by contiguous slicing into
/// `(n_opt, n_cal, n_test)` parts. Records beyond the requested sizes are
/// dropped. Deterministic in (input order, seed, sizes).
pub fn split_dataset(
    records: Vec<TrajectoryRecord>,
    seed: u64,
    sizes: (usize, usize, usize),
) -> Result<DatasetSplit> {
    let (n_opt, n_cal, n_test) = sizes;
    let total = n_opt
        .checked_add(n_cal)
        .and_then(|s| s.checked_add(n_test))
        .ok_or_else(|| Error::invalid("split sizes overflow"))?;
    if total > records.len() {
        return Err(Error::invalid(format!(
            "split sizes {n_opt}+{n_cal}+{n_test} exceed record count {}",
            records.len()
        )));
    }
    let mut shuffled = records;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let mut rest = shuffled;
    let opt: Vec<_> = rest.drain(..n_opt).collect();
    let cal: Vec<_> = rest.drain(..n_cal).collect();
    let test: Vec<_> = rest.drain(..n_test).collect();
    Ok(DatasetSplit {
        opt,
        cal,
        test,
        seed,
    })
}

/// Validate the structural invariants of a single record.
pub fn validate_record(record: &TrajectoryRecord) -> Result<()> {
    if record.turns.is_empty() {
        return Err(Error::schema(format!("record {}: no turns", record.id)));
    }
    if record.gold_answers.is_empty() {
        return Err(Error::schema(format!(
            "record {}: gold_answers is empty",
            record.id
        )));
    }
    let m = record.turns[0].samples.len();
    if m < 1 {
        return Err(Error::schema(format!(
            "record {}: turn 0 has no samples",
            record.id
        )));
    }
    for (i, turn) in record.turns.iter().enumerate() {
        if turn.t != i {
            return Err(Error::schema(format!(
                "record {}: turn index {} at position {i} (must be consecutive from 0)",
                record.id, turn.t
            )));
        }
        if turn.samples.len() != m {
            return Err(Error::schema(format!(
                "record {}: turn {} has {} samples, turn 0 has {m}",
                record.id,
                turn.t,
                turn.samples.len()
            )));
        }
        for p in &turn.passages {
            if !p.score.is_finite() {
                return Err(Error::schema(format!(
                    "record {}: passage {} has non-finite score",
                    record.id, p.pid
                )));
            }
        }
        for s in &turn.samples {
            if let Some(e) = &s.embedding {
                if e.iter().all(|x| *x == 0.0) {
                    return Err(Error::schema(format!(
                        "record {}: zero-norm embedding for sample {:?}",
                        record.id, s.text
                    )));
                }
                if e.iter().any(|x| !x.is_finite()) {
                    return Err(Error::schema(format!(
                        "record {}: non-finite embedding for sample {:?}",
                        record.id, s.text
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Parse a line-delimited trajectory log. Blank lines are skipped; parse and
/// schema errors carry the 1-based line number. Embedding dimensions must
/// agree across the whole stream, and record ids must be unique.
pub fn parse_trajectory_log(reader: impl BufRead) -> Result<Vec<TrajectoryRecord>> {
    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut embed_dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        validate_record(&record).map_err(|e| match e {
            Error::Schema { msg, .. } => Error::schema_at(line_no, msg),
            other => other,
        })?;
        for turn in &record.turns {
            for s in &turn.samples {
                if let Some(e) = &s.embedding {
                    match embed_dim {
                        None => embed_dim = Some(e.len()),
                        Some(d) if d != e.len() => {
                            return Err(Error::schema_at(
                                line_no,
                                format!(
                                    "record {}: embedding dimension {} differs from {d}",
                                    record.id,
                                    e.len()
                                ),
                            ));
                        }
                        _ => {}
                    }
                }
            }
        }
        if !seen_ids.insert(record.id.clone()) {
            return Err(Error::schema_at(
                line_no,
                format!("duplicate record id {}", record.id),
            ));
        }
        records.push(record);
    }
    Ok(records)
}

/// Read a trajectory log from a file path.
pub fn read_trajectory_file(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let file = File::open(path.as_ref())?;
    parse_trajectory_log(BufReader::new(file))
}

/// Write records as a line-delimited log.
pub fn write_trajectory_log(records: &[TrajectoryRecord], mut writer: impl Write) -> Result<()> {
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::invalid(format!("serialize record {}: {e}", record.id)))?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

/// Write records to a file path.
pub fn write_trajectory_file(records: &[TrajectoryRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut file = File::create(path.as_ref())?;
    write_trajectory_log(records, &mut file)?;
    Ok(())
}
