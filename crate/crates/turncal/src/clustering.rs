//! Per-turn answer clustering and the confidence scores built on it.
//!
//! Sampled answers are grouped into clusters of semantically equivalent
//! strings, either by average-linkage agglomerative clustering over cosine
//! similarity of precomputed embeddings, or by normalized exact match when
//! embeddings are unavailable. Each cluster carries its frequency
//! `|C_j| / M` and a penalized confidence `frequency - eta * NE`, where NE
//! is the normalized entropy of the whole turn's cluster distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{normalize_answer, AnswerSample, TrajectoryRecord};

/// How answers are grouped into equivalence clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMode {
    /// Average-linkage agglomerative clustering on cosine similarity.
    #[default]
    Embedding,
    /// Group by `normalize_answer` equality.
    ExactMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// Merging stops once the best inter-cluster average similarity drops
    /// below this value. Strictly between 0 and 1.
    pub similarity_threshold: f64,
    /// Entropy penalty weight in the confidence score.
    pub eta: f64,
    pub mode: ClusterMode,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            similarity_threshold: 0.9,
            eta: 0.1,
            mode: ClusterMode::Embedding,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "similarity threshold must be in (0, 1), got {}",
                self.similarity_threshold
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!(
                "eta must be a finite nonnegative real, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// A group of equivalent sampled answers within one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Text of the first (lowest-index) member.
    pub representative: String,
    /// Sample indices, ascending.
    pub members: Vec<usize>,
    /// `|members| / M`.
    pub frequency: f64,
    /// `frequency - eta * NE` of the turn; may be negative.
    pub penalized_confidence: f64,
}

/// `frequency - eta * ne`.
pub fn penalized_confidence(frequency: f64, ne: f64, eta: f64) -> f64 {
    frequency - eta * ne
}

fn entropy_from_freqs(freqs: &[f64], m: usize) -> f64 {
    if m < 2 {
        // A single draw is fully concentrated by definition.
        return 0.0;
    }
    let log_m = (m as f64).ln();
    let h: f64 = freqs
        .iter()
        .filter(|f| **f > 0.0)
        .map(|f| f * f.ln())
        .sum();
    -h / log_m
}

/// Normalized entropy of a turn's cluster distribution:
/// `-(1 / ln M) * sum_j f(C_j) ln f(C_j)`, in `[0, 1]`.
///
/// 0 when all mass sits in one cluster, 1 for M singleton clusters.
/// Requires `M >= 2` (the normalizer vanishes at M = 1).
pub fn normalized_entropy(clusters: &[Cluster], m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::invalid(format!(
            "normalized entropy needs M >= 2 samples, got {m}"
        )));
    }
    let sum: f64 = clusters.iter().map(|c| c.frequency).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "cluster frequencies sum to {sum}, expected 1"
        )));
    }
    let freqs: Vec<f64> = clusters.iter().map(|c| c.frequency).collect();
    Ok(entropy_from_freqs(&freqs, m))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Group sample indices by average-linkage agglomeration over cosine
/// similarity, merging while the best inter-cluster average similarity is
/// at or above the threshold. Ties between candidate merges are broken by
/// the lexicographically smallest pair of cluster anchor indices (each
/// cluster's anchor is its smallest member index), which makes the
/// agglomeration order a total one.
fn agglomerate(embeddings: &[&[f64]], threshold: f64) -> Vec<Vec<usize>> {
    let n = embeddings.len();
    let mut sim = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = cosine(embeddings[i], embeddings[j]);
            sim[i][j] = s;
            sim[j][i] = s;
        }
    }
    // pair_sum[a][b]: sum of cross-pair similarities between clusters a, b.
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut pair_sum = sim.clone();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            let Some(ca) = &clusters[a] else { continue };
            for b in (a + 1)..n {
                let Some(cb) = &clusters[b] else { continue };
                let avg = pair_sum[a][b] / (ca.len() * cb.len()) as f64;
                let better = match best {
                    None => true,
                    // Slot indices equal cluster anchors: members are sorted
                    // and slot k always holds the cluster whose smallest
                    // member is k, so (a, b) is the tie-break key.
                    Some((bs, ba, bb)) => avg > bs || (avg == bs && (a, b) < (ba, bb)),
                };
                if better {
                    best = Some((avg, a, b));
                }
            }
        }
        match best {
            Some((s, a, b)) if s >= threshold => {
                let cb = clusters[b].take().expect("live cluster");
                clusters[a].as_mut().expect("live cluster").extend(cb);
                clusters[a].as_mut().expect("live cluster").sort_unstable();
                for k in 0..n {
                    if k != a && clusters[k].is_some() {
                        let merged = pair_sum[k][a] + pair_sum[k][b];
                        pair_sum[k][a] = merged;
                        pair_sum[a][k] = merged;
                    }
                }
            }
            _ => break,
        }
    }
    clusters.into_iter().flatten().collect()
}

fn group_by_normalized_text(samples: &[AnswerSample]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let key = normalize_answer(&s.text);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

/// Cluster one turn's sampled answers.
///
/// Clusters are returned in a canonical total order: frequency descending,
/// then representative ascending, then smallest member index, so repeated
/// runs on the same input produce identical bytes.
pub fn cluster_answers(samples: &[AnswerSample], config: &ClusteringConfig) -> Result<Vec<Cluster>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("cannot cluster an empty sample list"));
    }
    let partition = match config.mode {
        ClusterMode::Embedding => {
            let embeddings: Vec<&[f64]> = samples
                .iter()
                .map(|s| {
                    s.embedding.as_deref().ok_or_else(|| {
                        Error::invalid(format!(
                            "embedding mode requires embeddings; sample {:?} has none",
                            s.text
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            agglomerate(&embeddings, config.similarity_threshold)
        }
        ClusterMode::ExactMatch => group_by_normalized_text(samples),
    };
    let m = samples.len();
    let freqs: Vec<f64> = partition.iter().map(|c| c.len() as f64 / m as f64).collect();
    let ne = entropy_from_freqs(&freqs, m);
    let mut clusters: Vec<Cluster> = partition
        .into_iter()
        .zip(freqs)
        .map(|(members, frequency)| Cluster {
            representative: samples[members[0]].text.clone(),
            members,
            frequency,
            penalized_confidence: penalized_confidence(frequency, ne, config.eta),
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.frequency
            .total_cmp(&a.frequency)
            .then_with(|| a.representative.cmp(&b.representative))
            .then_with(|| a.members[0].cmp(&b.members[0]))
    });
    Ok(clusters)
}

/// Cluster one turn of a record, falling back to exact-match grouping when
/// embedding mode is requested but the turn lacks embeddings.
pub fn cluster_record_turn(
    record: &TrajectoryRecord,
    t: usize,
    config: &ClusteringConfig,
) -> Result<Vec<Cluster>> {
    let turn = record
        .turns
        .get(t)
        .ok_or_else(|| Error::invalid(format!("record {} has no turn {t}", record.id)))?;
    let mut effective = *config;
    if effective.mode == ClusterMode::Embedding
        && turn.samples.iter().any(|s| s.embedding.is_none())
    {
        effective.mode = ClusterMode::ExactMatch;
    }
    cluster_answers(&turn.samples, &effective)
}

/// Normalized entropy of one turn of a record (0.0 for M = 1).
pub fn turn_entropy(record: &TrajectoryRecord, t: usize, config: &ClusteringConfig) -> Result<f64> {
    let clusters = cluster_record_turn(record, t, config)?;
    let freqs: Vec<f64> = clusters.iter().map(|c| c.frequency).collect();
    Ok(entropy_from_freqs(&freqs, record.samples_per_turn()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn embedded(text: &str, e: &[f64]) -> AnswerSample {
        AnswerSample {
            text: text.to_string(),
            embedding: Some(e.to_vec()),
        }
    }

    fn plain(text: &str) -> AnswerSample {
        AnswerSample {
            text: text.to_string(),
            embedding: None,
        }
    }

    fn exact_config() -> ClusteringConfig {
        ClusteringConfig {
            mode: ClusterMode::ExactMatch,
            ..Default::default()
        }
    }

    #[test]
    fn identical_strings_form_one_cluster() {
        let samples: Vec<_> = (0..15).map(|_| plain("same answer")).collect();
        let clusters = cluster_answers(&samples, &exact_config()).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].frequency, 1.0);
        assert_eq!(clusters[0].members.len(), 15);
        // NE = 0 when concentrated, so penalized confidence equals frequency.
        assert_eq!(clusters[0].penalized_confidence, 1.0);
    }

    #[test]
    fn orthogonal_embeddings_stay_singletons() {
        let samples: Vec<_> = (0..4)
            .map(|i| {
                let mut e = vec![0.0; 4];
                e[i] = 1.0;
                embedded(&format!("t{i}"), &e)
            })
            .collect();
        let clusters = cluster_answers(&samples, &ClusteringConfig::default()).unwrap();
        assert_eq!(clusters.len(), 4);
        assert!(clusters.iter().all(|c| c.frequency == 0.25));
    }

    #[test]
    fn two_pair_partition_matches_hand_agglomeration() {
        // e1, e1, e2, e2 with cos(e1, e2) = 0: merging joins the two equal
        // pairs first, then stops at inter-cluster similarity 0 < 0.9.
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        let samples = vec![
            embedded("alpha", &e1),
            embedded("alpha again", &e1),
            embedded("beta", &e2),
            embedded("beta again", &e2),
        ];
        let clusters = cluster_answers(&samples, &ClusteringConfig::default()).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].frequency, 0.5);
        assert_eq!(clusters[1].frequency, 0.5);
        // Tie on frequency: ordered by representative string.
        assert_eq!(clusters[0].representative, "alpha");
        assert_eq!(clusters[0].members, vec![0, 1]);
        assert_eq!(clusters[1].members, vec![2, 3]);
    }

    #[test]
    fn embedding_mode_requires_embeddings() {
        let samples = vec![embedded("a", &[1.0]), plain("b")];
        assert!(cluster_answers(&samples, &ClusteringConfig::default()).is_err());
    }

    #[test]
    fn normalized_entropy_examples() {
        let mk = |freqs: &[f64]| -> Vec<Cluster> {
            freqs
                .iter()
                .enumerate()
                .map(|(i, f)| Cluster {
                    representative: format!("c{i}"),
                    members: vec![i],
                    frequency: *f,
                    penalized_confidence: *f,
                })
                .collect()
        };
        assert!((normalized_entropy(&mk(&[1.0]), 15).unwrap() - 0.0).abs() < 1e-12);
        let uniform: Vec<f64> = vec![1.0 / 15.0; 15];
        assert!((normalized_entropy(&mk(&uniform), 15).unwrap() - 1.0).abs() < 1e-12);
        let ne = normalized_entropy(&mk(&[0.5, 0.25, 0.25]), 4).unwrap();
        assert!((ne - 0.75).abs() < 1e-12);
        assert!(normalized_entropy(&mk(&[1.0]), 1).is_err());
        assert!(normalized_entropy(&mk(&[0.5]), 4).is_err());
    }

    #[test]
    fn penalized_confidence_examples() {
        assert!((penalized_confidence(0.8, 0.5, 0.1) - 0.75).abs() < 1e-15);
        assert_eq!(penalized_confidence(0.7, 0.0, 5.0), 0.7);
        assert!((penalized_confidence(0.0, 1.0, 0.1) - (-0.1)).abs() < 1e-15);
    }

    #[test]
    fn clustering_is_byte_deterministic() {
        let samples = vec![
            plain("x"),
            plain("y"),
            plain("x"),
            plain("z"),
            plain("y"),
            plain("x"),
        ];
        let a = serde_json::to_string(&cluster_answers(&samples, &exact_config()).unwrap()).unwrap();
        let b = serde_json::to_string(&cluster_answers(&samples, &exact_config()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn record_turn_falls_back_without_embeddings() {
        let record = TrajectoryRecord {
            id: "r".into(),
            question: "q".into(),
            gold_answers: vec!["g".into()],
            turns: vec![crate::trajectory::TurnLog {
                t: 0,
                passages: vec![],
                samples: vec![plain("g"), plain("g"), plain("h")],
            }],
        };
        let clusters = cluster_record_turn(&record, 0, &ClusteringConfig::default()).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].representative, "g");
    }

    // Enumerate all set partitions of {0..m-1} via restricted growth strings.
    fn all_partitions(m: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut assignment = vec![0usize; m];
        fn rec(i: usize, max_used: usize, assignment: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == assignment.len() {
                out.push(assignment.clone());
                return;
            }
            for block in 0..=max_used + 1 {
                assignment[i] = block;
                rec(i + 1, max_used.max(block), assignment, out);
            }
        }
        if m > 0 {
            rec(1, 0, &mut assignment, &mut out);
        }
        out
    }

    #[test]
    fn singleton_partition_maximizes_entropy() {
        for m in 2..=6usize {
            let mut best = f64::NEG_INFINITY;
            let mut best_is_singletons = false;
            for assignment in all_partitions(m) {
                let blocks = assignment.iter().max().unwrap() + 1;
                let mut counts = vec![0usize; blocks];
                for &b in &assignment {
                    counts[b] += 1;
                }
                let freqs: Vec<f64> = counts.iter().map(|c| *c as f64 / m as f64).collect();
                let ne = entropy_from_freqs(&freqs, m);
                assert!((0.0..=1.0 + 1e-12).contains(&ne));
                if ne > best {
                    best = ne;
                    best_is_singletons = blocks == m;
                }
            }
            assert!(best_is_singletons, "M={m}: singletons not the argmax");
            assert!((best - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn partition_covers_every_sample_once(
            texts in proptest::collection::vec(0u8..4, 1..20)
        ) {
            let samples: Vec<_> = texts.iter().map(|t| plain(&format!("w{t}"))).collect();
            let clusters = cluster_answers(&samples, &exact_config()).unwrap();
            let mut seen = vec![false; samples.len()];
            for c in &clusters {
                for &i in &c.members {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
                prop_assert!((c.frequency - c.members.len() as f64 / samples.len() as f64).abs() < 1e-15);
            }
            prop_assert!(seen.iter().all(|s| *s));
            let total: f64 = clusters.iter().map(|c| c.frequency).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn entropy_is_permutation_invariant(freq_counts in proptest::collection::vec(1usize..5, 1..6)) {
            let m: usize = freq_counts.iter().sum();
            prop_assume!(m >= 2);
            let mut freqs: Vec<f64> = freq_counts.iter().map(|c| *c as f64 / m as f64).collect();
            let a = entropy_from_freqs(&freqs, m);
            freqs.reverse();
            let b = entropy_from_freqs(&freqs, m);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
