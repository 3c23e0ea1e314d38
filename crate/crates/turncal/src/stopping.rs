//! Per-turn early-stopping calibration under an error-budget constraint,
//! the composite stopping objective, and the budget-allocation grid search.
//!
//! The total miscoverage budget `alpha` is decomposed across turns:
//!
//! ```text
//! sum_t (1 - c_ans_t) * alpha_t  <=  (1 - c_ans_final) * alpha
//! ```
//!
//! where `c_ans_t` is the answerable fraction of records still active at
//! turn `t` and `c_ans_final` the fraction of records whose gold answer is
//! ever sampled. Each turn's stopping threshold is an upper conformal
//! quantile of the stop scores of the *unanswerable* actives, so at most an
//! `alpha_t` fraction of them stop on confidence at turn `t`; that is
//! exactly the quantity the decomposition charges for.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_record_turn, turn_entropy, ClusteringConfig};
use crate::conformal::{lower_quantile, upper_quantile, Threshold};
use crate::error::{Error, Result};
use crate::summary::{build_summaries, RecordSummary, StopScoreMode};
use crate::trajectory::{GoldMatcher, TrajectoryRecord};

const BUDGET_SLACK: f64 = 1e-12;
const FRACTION_CLAMP: f64 = 1e-6;

/// Calibrated stopping state for one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnBudget {
    pub t: usize,
    /// Error budget spent on this turn.
    pub alpha_t: f64,
    /// Stop-score threshold: records stop once their score admits.
    pub q_t: Threshold,
    /// Answerable fraction among records still active at this turn.
    pub c_ans_t: f64,
    pub n_active: usize,
    /// Size of the unanswerable active subset the threshold was fit on.
    pub n_unanswerable: usize,
    /// Set when no unanswerable actives existed, forcing a +inf threshold.
    pub u_empty: bool,
}

/// A complete per-turn budget allocation with its calibration statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAllocation {
    pub budgets: Vec<TurnBudget>,
    pub alpha_total: f64,
    /// Fraction of calibration records whose gold is sampled at any turn.
    pub c_ans_final: f64,
    pub gamma: f64,
    pub stop_score_mode: StopScoreMode,
}

impl BudgetAllocation {
    /// Left side of the budget decomposition.
    pub fn budget_spent(&self) -> f64 {
        self.budgets
            .iter()
            .map(|b| (1.0 - b.c_ans_t) * b.alpha_t)
            .sum()
    }

    /// Right side of the budget decomposition.
    pub fn budget_available(&self) -> f64 {
        (1.0 - self.c_ans_final) * self.alpha_total
    }

    /// Check the decomposition constraint, with floating-point slack.
    pub fn check_budget(&self) -> Result<()> {
        let spent = self.budget_spent();
        let available = self.budget_available();
        if spent > available + BUDGET_SLACK {
            return Err(Error::Infeasible(format!(
                "per-turn budgets spend {spent:.6} of the decomposed error budget, \
                 but only (1 - c_ans_final) * alpha = {available:.6} is available"
            )));
        }
        Ok(())
    }

    /// Per-turn alpha values, in turn order.
    pub fn alphas(&self) -> Vec<f64> {
        self.budgets.iter().map(|b| b.alpha_t).collect()
    }
}

/// Stopping decision for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopOutcome {
    pub id: String,
    /// First turn whose score met its threshold, else the record's last turn.
    pub t_star: usize,
    pub early_stopped: bool,
    /// Stop scores of the turns that were actually evaluated (`0..=t_star`).
    pub scores: Vec<f64>,
}

/// Stop counts for one turn, used by the composite objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnTally {
    pub t: usize,
    /// Records that stopped here with a gold-matching cluster in their set.
    pub n_corr: usize,
    /// Records that stopped here without one.
    pub n_wrong: usize,
    pub c_ans_t: f64,
}

/// Turn-level stopping score of a record.
///
/// `PenalizedFreq` is the highest entropy-penalized cluster confidence of
/// the turn; `NegEntropy` negates the turn's normalized entropy so that in
/// both modes larger means more confident.
pub fn stop_score(
    record: &TrajectoryRecord,
    t: usize,
    config: &ClusteringConfig,
    mode: StopScoreMode,
) -> Result<f64> {
    match mode {
        StopScoreMode::PenalizedFreq => {
            let clusters = cluster_record_turn(record, t, config)?;
            Ok(clusters
                .iter()
                .map(|c| c.penalized_confidence)
                .fold(f64::NEG_INFINITY, f64::max))
        }
        StopScoreMode::NegEntropy => Ok(-turn_entropy(record, t, config)?),
    }
}

/// The subset of `active` whose gold answer has not appeared in any sampled
/// answer up to and including turn `t`.
pub fn unanswerable_set<'a>(
    active: &[&'a TrajectoryRecord],
    t: usize,
    matcher: GoldMatcher,
) -> Vec<&'a TrajectoryRecord> {
    active
        .iter()
        .copied()
        .filter(|r| !r.gold_sampled_by(t, matcher))
        .collect()
}

pub(crate) struct SweepResult {
    pub budgets: Vec<TurnBudget>,
    /// Stopping turn per input record, aligned with the summary slice.
    pub t_stars: Vec<usize>,
    pub c_ans_final: f64,
}

fn fraction_answerable_final(summaries: &[RecordSummary]) -> f64 {
    if summaries.is_empty() {
        return 1.0;
    }
    summaries.iter().filter(|s| s.answerable_final()).count() as f64 / summaries.len() as f64
}

/// Sequential threshold sweep over a shrinking active set.
///
/// `alphas` must hold one budget per turn (length `max turn index + 1`).
/// A record still active at its own final turn stops there regardless of
/// the threshold.
pub(crate) fn sweep_thresholds(
    summaries: &[RecordSummary],
    alphas: &[f64],
    mode: StopScoreMode,
) -> Result<SweepResult> {
    if summaries.is_empty() {
        return Err(Error::invalid("cannot calibrate on an empty record set"));
    }
    let turns = summaries.iter().map(|s| s.turn_count()).max().unwrap_or(0);
    if alphas.len() != turns {
        return Err(Error::invalid(format!(
            "need one budget per turn: got {} budgets for {turns} turns",
            alphas.len()
        )));
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::invalid(format!("negative or non-finite budget {a}")));
    }

    let mut t_stars = vec![usize::MAX; summaries.len()];
    let mut active: Vec<usize> = (0..summaries.len()).collect();
    let mut budgets = Vec::with_capacity(turns);
    for (t, &alpha_t) in alphas.iter().enumerate() {
        let n_active = active.len();
        let unanswerable: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| !summaries[i].gold_sampled_by(t.min(summaries[i].max_turn())))
            .collect();
        let n_unanswerable = unanswerable.len();
        let c_ans_t = if n_active == 0 {
            1.0
        } else {
            1.0 - n_unanswerable as f64 / n_active as f64
        };
        let scores: Vec<f64> = unanswerable
            .iter()
            .map(|&i| summaries[i].stop_score(t.min(summaries[i].max_turn()), mode))
            .collect();
        let (q_t, u_empty) = if scores.is_empty() {
            (Threshold::pos_inf(alpha_t.min(1.0), 0), true)
        } else {
            (upper_quantile(&scores, alpha_t.min(1.0))?, false)
        };
        let mut still_active = Vec::with_capacity(active.len());
        for &i in &active {
            let s = &summaries[i];
            let own_t = t.min(s.max_turn());
            let stops = q_t.admits(s.stop_score(own_t, mode)) || own_t == s.max_turn();
            if stops {
                t_stars[i] = own_t;
            } else {
                still_active.push(i);
            }
        }
        active = still_active;
        budgets.push(TurnBudget {
            t,
            alpha_t,
            q_t,
            c_ans_t,
            n_active,
            n_unanswerable,
            u_empty,
        });
    }
    debug_assert!(active.is_empty(), "every record stops by its final turn");
    debug_assert!(t_stars.iter().all(|t| *t != usize::MAX));
    Ok(SweepResult {
        budgets,
        t_stars,
        c_ans_final: fraction_answerable_final(summaries),
    })
}

/// Final-turn budget from the decomposition at equality:
/// `alpha_T = [(1 - c_ans_final) * alpha - sum_{t<T} (1 - c_ans_t) * alpha_t]
/// / (1 - c_ans_T)`, denominator clamped below at 1e-6 and the result
/// clamped into `[0, 1]`. `None` when the head alphas already overspend.
pub fn derive_final_budget(
    head_alphas: &[f64],
    one_minus_c_ans: &[f64],
    alpha_total: f64,
    c_ans_final: f64,
) -> Option<f64> {
    debug_assert_eq!(one_minus_c_ans.len(), head_alphas.len() + 1);
    let available = (1.0 - c_ans_final) * alpha_total;
    let spent: f64 = head_alphas
        .iter()
        .zip(one_minus_c_ans)
        .map(|(a, u)| a * u)
        .sum();
    let remaining = available - spent;
    if remaining < -BUDGET_SLACK {
        return None;
    }
    let denom = one_minus_c_ans[head_alphas.len()].max(FRACTION_CLAMP);
    Some((remaining.max(0.0) / denom).clamp(0.0, 1.0))
}

/// Sweep with the final turn's budget derived from the decomposition at
/// equality. `head_alphas` covers turns `0..T`; returns `None` when the
/// head overspends the budget (infeasible point).
pub(crate) fn sweep_with_derived_final(
    summaries: &[RecordSummary],
    head_alphas: &[f64],
    alpha_total: f64,
    mode: StopScoreMode,
) -> Result<Option<SweepResult>> {
    if summaries.is_empty() {
        return Err(Error::invalid("cannot calibrate on an empty record set"));
    }
    let turns = summaries.iter().map(|s| s.turn_count()).max().unwrap_or(0);
    if head_alphas.len() + 1 != turns {
        return Err(Error::invalid(format!(
            "need per-turn budgets for turns 0..{}: got {}",
            turns - 1,
            head_alphas.len()
        )));
    }
    // The head's c_ans stats do not depend on the final turn's budget, so a
    // full sweep with a placeholder final alpha measures them correctly.
    let mut alphas = head_alphas.to_vec();
    alphas.push(0.0);
    let probe = sweep_thresholds(summaries, &alphas, mode)?;
    let one_minus: Vec<f64> = probe.budgets.iter().map(|b| 1.0 - b.c_ans_t).collect();
    let Some(alpha_final) =
        derive_final_budget(head_alphas, &one_minus, alpha_total, probe.c_ans_final)
    else {
        return Ok(None);
    };
    *alphas.last_mut().expect("nonempty") = alpha_final;
    Ok(Some(sweep_thresholds(summaries, &alphas, mode)?))
}

/// Like [`sweep_with_derived_final`], but when the head overspends the
/// budget on this record set, scale it down (preserving its shape) until it
/// fits, falling back to the all-zero head. A head selected on a held-out
/// optimization set typically spends the whole budget there, so on the
/// calibration set's own answerability statistics it can land slightly
/// outside the feasible region; projecting back is conservative (smaller
/// budgets only reduce early stopping).
pub(crate) fn fit_head_to_budget(
    summaries: &[RecordSummary],
    head_alphas: &[f64],
    alpha_total: f64,
    mode: StopScoreMode,
) -> Result<(Vec<f64>, SweepResult)> {
    let mut head = head_alphas.to_vec();
    for _ in 0..16 {
        let mut alphas = head.clone();
        alphas.push(0.0);
        let probe = sweep_thresholds(summaries, &alphas, mode)?;
        let one_minus: Vec<f64> = probe.budgets.iter().map(|b| 1.0 - b.c_ans_t).collect();
        if let Some(alpha_final) =
            derive_final_budget(&head, &one_minus, alpha_total, probe.c_ans_final)
        {
            *alphas.last_mut().expect("nonempty") = alpha_final;
            return Ok((head, sweep_thresholds(summaries, &alphas, mode)?));
        }
        let available = (1.0 - probe.c_ans_final) * alpha_total;
        let spent: f64 = head.iter().zip(&one_minus).map(|(a, u)| a * u).sum();
        if spent <= 0.0 {
            break;
        }
        let scale = (available / spent).clamp(0.0, 1.0) * (1.0 - 1e-9);
        for a in &mut head {
            *a *= scale;
        }
    }
    // The all-zero head spends nothing, so it always fits.
    let zeros = vec![0.0; head_alphas.len()];
    let sweep = sweep_with_derived_final(summaries, &zeros, alpha_total, mode)?
        .expect("zero head is always feasible");
    Ok((zeros, sweep))
}

/// Calibrate per-turn stopping thresholds with explicit budgets for every
/// turn (including the final one).
pub fn calibrate_stop_thresholds(
    cal: &[TrajectoryRecord],
    alphas: &[f64],
    config: &ClusteringConfig,
    mode: StopScoreMode,
    matcher: GoldMatcher,
) -> Result<Vec<TurnBudget>> {
    let summaries = build_summaries(cal, config, matcher, false)?;
    Ok(sweep_thresholds(&summaries, alphas, mode)?.budgets)
}

/// First turn whose stop score meets its calibrated threshold; the record's
/// own final turn if none does.
pub fn apply_stopping(
    record: &TrajectoryRecord,
    budgets: &[TurnBudget],
    config: &ClusteringConfig,
    mode: StopScoreMode,
) -> Result<StopOutcome> {
    if budgets.len() < record.turns.len() {
        return Err(Error::invalid(format!(
            "record {} has {} turns but only {} budgets were calibrated",
            record.id,
            record.turns.len(),
            budgets.len()
        )));
    }
    let last = record.max_turn();
    let mut scores = Vec::with_capacity(last + 1);
    for (t, budget) in budgets.iter().enumerate().take(last + 1) {
        let s = stop_score(record, t, config, mode)?;
        scores.push(s);
        if budget.q_t.admits(s) || t == last {
            return Ok(StopOutcome {
                id: record.id.clone(),
                t_star: t,
                early_stopped: t < last,
                scores,
            });
        }
    }
    unreachable!("loop always returns at the final turn");
}

/// Stopping turn for a precomputed score profile; same rule as
/// [`apply_stopping`] without re-clustering.
pub fn apply_stopping_summary(
    summary: &RecordSummary,
    budgets: &[TurnBudget],
    mode: StopScoreMode,
) -> usize {
    let last = summary.max_turn();
    for (t, budget) in budgets.iter().enumerate().take(last + 1) {
        if budget.q_t.admits(summary.stop_score(t, mode)) || t == last {
            return t;
        }
    }
    unreachable!("loop always returns at the final turn");
}

/// Composite stopping objective:
/// `gamma * avg_turns - [sum_t n_corr_t / c_ans_t] / [sum_t n_wrong_t / (1 - c_ans_t)]`.
///
/// Turns where nothing stopped contribute to neither sum; answerable
/// fractions are clamped away from 0 and 1, and the denominator away from
/// 0, so the objective is always finite. Lower is better.
pub fn composite_objective(tallies: &[TurnTally], avg_turns: f64, gamma: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for tally in tallies {
        if tally.n_corr + tally.n_wrong == 0 {
            continue;
        }
        let c = tally.c_ans_t.clamp(FRACTION_CLAMP, 1.0 - FRACTION_CLAMP);
        num += tally.n_corr as f64 / c;
        den += tally.n_wrong as f64 / (1.0 - c);
    }
    gamma * avg_turns - num / den.max(FRACTION_CLAMP)
}

/// Aggregate stop outcomes into per-turn tallies.
pub(crate) fn tally_turns(
    t_stars: &[usize],
    answered_correctly: &[bool],
    budgets: &[TurnBudget],
) -> Vec<TurnTally> {
    let mut tallies: Vec<TurnTally> = budgets
        .iter()
        .map(|b| TurnTally {
            t: b.t,
            n_corr: 0,
            n_wrong: 0,
            c_ans_t: b.c_ans_t,
        })
        .collect();
    for (&t, &ok) in t_stars.iter().zip(answered_correctly) {
        if ok {
            tallies[t].n_corr += 1;
        } else {
            tallies[t].n_wrong += 1;
        }
    }
    tallies
}

/// Evaluate one budget head on a summary set: sweep thresholds, derive the
/// final budget, calibrate the answer-set threshold in place, and score the
/// composite objective. `None` when the head is infeasible.
pub(crate) fn objective_for_head(
    summaries: &[RecordSummary],
    head_alphas: &[f64],
    alpha_total: f64,
    gamma: f64,
    mode: StopScoreMode,
) -> Result<Option<(f64, SweepResult)>> {
    let Some(sweep) = sweep_with_derived_final(summaries, head_alphas, alpha_total, mode)? else {
        return Ok(None);
    };
    let gold_confs: Vec<f64> = summaries
        .iter()
        .zip(&sweep.t_stars)
        .filter_map(|(s, &t)| s.gold_confidence_by(t))
        .collect();
    let q_freq = if gold_confs.is_empty() {
        Threshold::pos_inf(alpha_total, 0)
    } else {
        lower_quantile(&gold_confs, alpha_total)?
    };
    let answered_correctly: Vec<bool> = summaries
        .iter()
        .zip(&sweep.t_stars)
        .map(|(s, &t)| s.gold_confidence_by(t).is_some_and(|c| q_freq.admits(c)))
        .collect();
    let tallies = tally_turns(&sweep.t_stars, &answered_correctly, &sweep.budgets);
    let avg_turns =
        sweep.t_stars.iter().sum::<usize>() as f64 / sweep.t_stars.len().max(1) as f64;
    let l = composite_objective(&tallies, avg_turns, gamma);
    Ok(Some((l, sweep)))
}

fn head_from_indices(indices: &[usize], values: &[f64]) -> Vec<f64> {
    indices.iter().map(|&i| values[i]).collect()
}

/// Grid search over per-turn budget allocations.
///
/// Each of the first `T` turns ranges over `grid_steps` evenly spaced values
/// in `[0, alpha_total]` (endpoints included, so the no-early-stop baseline
/// is always in the search space); the final turn's budget is derived from
/// the decomposition at equality. Returns the feasible allocation minimizing
/// the composite objective on `opt`, ties broken toward the lexicographically
/// smallest head.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    opt: &[TrajectoryRecord],
    alpha_total: f64,
    grid_steps: usize,
    gamma: f64,
    config: &ClusteringConfig,
    mode: StopScoreMode,
    matcher: GoldMatcher,
    parallel: bool,
) -> Result<BudgetAllocation> {
    if grid_steps < 2 {
        return Err(Error::invalid(format!(
            "grid search needs at least 2 steps per dimension, got {grid_steps}"
        )));
    }
    if opt.is_empty() {
        return Err(Error::invalid("grid search needs a nonempty optimization set"));
    }
    if !(alpha_total > 0.0 && alpha_total < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must be in (0, 1), got {alpha_total}"
        )));
    }
    let summaries = build_summaries(opt, config, matcher, parallel)?;
    let turns = summaries.iter().map(|s| s.turn_count()).max().unwrap_or(0);
    let dims = turns - 1;
    let values: Vec<f64> = (0..grid_steps)
        .map(|j| alpha_total * j as f64 / (grid_steps - 1) as f64)
        .collect();
    let n_points = grid_steps.checked_pow(dims as u32).ok_or_else(|| {
        Error::invalid(format!(
            "grid of {grid_steps}^{dims} allocations is too large to enumerate"
        ))
    })?;

    let indices_of = |mut point: usize| -> Vec<usize> {
        let mut idx = vec![0usize; dims];
        for slot in (0..dims).rev() {
            idx[slot] = point % grid_steps;
            point /= grid_steps;
        }
        idx
    };
    let eval_point = |point: usize| -> Result<Option<(f64, Vec<usize>)>> {
        let indices = indices_of(point);
        let head = head_from_indices(&indices, &values);
        Ok(objective_for_head(&summaries, &head, alpha_total, gamma, mode)?
            .map(|(l, _)| (l, indices)))
    };

    let evaluated: Vec<Option<(f64, Vec<usize>)>> = if parallel {
        (0..n_points)
            .into_par_iter()
            .map(eval_point)
            .collect::<Result<_>>()?
    } else {
        (0..n_points).map(eval_point).collect::<Result<_>>()?
    };
    // Deterministic argmin regardless of evaluation order: objective first,
    // then lexicographic head indices.
    let best = evaluated
        .into_iter()
        .flatten()
        .min_by(|(la, ia), (lb, ib)| la.total_cmp(lb).then_with(|| ia.cmp(ib)));
    let Some((_, best_indices)) = best else {
        return Err(Error::Infeasible(
            "every grid allocation violates the budget decomposition".to_string(),
        ));
    };
    let head = head_from_indices(&best_indices, &values);
    let (_, sweep) = objective_for_head(&summaries, &head, alpha_total, gamma, mode)?
        .expect("winning grid point is feasible");
    let allocation = BudgetAllocation {
        budgets: sweep.budgets,
        alpha_total,
        c_ans_final: sweep.c_ans_final,
        gamma,
        stop_score_mode: mode,
    };
    allocation.check_budget()?;
    Ok(allocation)
}
