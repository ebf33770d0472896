//! Prediction-accuracy metrics and the train/test tuning protocol.
//!
//! Both metrics compare a round's standings against the participants' prior
//! (post-diffusion, pre-update) ratings, so they measure genuine forecasts.
//! Per-player percentages are aggregated participant-weighted across rounds.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ContestRecord;
use crate::engine::Variant;
use crate::system::{process_round, PlayerMap, PlayerRoundRow, SystemError, SystemParams};

/// Precomputed per-round context shared by both metrics.
struct RoundCtx {
    /// 1-based rank each participant would get if sorted by prior rating
    /// (descending, ties by id).
    predicted_rank: Vec<usize>,
    /// 1-based inclusive rank range `[lo, hi]` of each participant's tie-group.
    actual_range: Vec<(usize, usize)>,
}

fn round_ctx(rows: &[PlayerRoundRow]) -> RoundCtx {
    let n = rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        rows[b]
            .prior_mu
            .total_cmp(&rows[a].prior_mu)
            .then_with(|| rows[a].player_id.cmp(&rows[b].player_id))
    });
    let mut predicted_rank = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        predicted_rank[i] = pos + 1;
    }
    let mut actual_range = vec![(0usize, 0usize); n];
    let mut start = 0;
    while start < n {
        let g = rows[start].group;
        let mut end = start;
        while end < n && rows[end].group == g {
            end += 1;
        }
        for slot in actual_range.iter_mut().take(end).skip(start) {
            *slot = (start + 1, end);
        }
        start = end;
    }
    RoundCtx {
        predicted_rank,
        actual_range,
    }
}

fn pair_inversion_counts(rows: &[PlayerRoundRow], i: usize) -> (usize, u64) {
    let mut correct = 0usize;
    let mut equal = 0u64;
    let (mu_i, g_i) = (rows[i].prior_mu, rows[i].group);
    for (j, row) in rows.iter().enumerate() {
        if j == i {
            continue;
        }
        if mu_i == row.prior_mu {
            // No falsifiable prediction between equal ratings; counted
            // correct and flagged in the report.
            equal += 1;
            correct += 1;
        } else if mu_i > row.prior_mu {
            correct += usize::from(g_i <= row.group);
        } else {
            correct += usize::from(row.group <= g_i);
        }
    }
    (correct, equal)
}

/// Percentage of opponents in the round against whom the prior ratings
/// predicted the matchup correctly (the higher-rated player won or tied).
/// `None` for singleton rounds.
pub fn pair_inversion(i: usize, rows: &[PlayerRoundRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let (correct, _) = pair_inversion_counts(rows, i);
    Some(correct as f64 / (rows.len() - 1) as f64 * 100.0)
}

/// Percentage distance between the player's actual rank and the rank
/// predicted by sorting on prior ratings. Within a tie-group, the actual
/// rank closest to the prediction is used. `None` for singleton rounds.
pub fn rank_deviation(i: usize, rows: &[PlayerRoundRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let ctx = round_ctx(rows);
    Some(rank_deviation_with(&ctx, rows.len(), i))
}

fn rank_deviation_with(ctx: &RoundCtx, n: usize, i: usize) -> f64 {
    let predicted = ctx.predicted_rank[i];
    let (lo, hi) = ctx.actual_range[i];
    let actual = predicted.clamp(lo, hi);
    (actual as f64 - predicted as f64).abs() / (n - 1) as f64 * 100.0
}

/// Per-round metric row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub contest_id: String,
    pub index: usize,
    pub participants: usize,
    /// Participants clearing the lifetime-contest threshold.
    pub counted: usize,
    pub pair_inversion_pct: Option<f64>,
    pub rank_deviation_pct: Option<f64>,
}

/// Aggregated prediction-accuracy report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    /// Participant-weighted mean over all counted (round, player) pairs;
    /// `None` when nothing was counted.
    pub pair_inversion_pct: Option<f64>,
    pub rank_deviation_pct: Option<f64>,
    pub counted_participants: u64,
    /// Matchups scored under the equal-rating rule, flagged for transparency.
    pub equal_rating_matchups: u64,
    pub min_contests: u32,
    pub rounds: Vec<RoundMetrics>,
}

/// Runs the full system over the round stream and scores every round from
/// its prior ratings. Players with fewer than `min_contests` lifetime
/// appearances in `dataset` are still rated but excluded from aggregation.
pub fn evaluate(
    dataset: &[ContestRecord],
    params: &SystemParams,
    min_contests: u32,
) -> Result<MetricReport, SystemError> {
    let mut lifetime: HashMap<&str, u32> = HashMap::new();
    for record in dataset {
        for group in &record.standings {
            for id in group {
                *lifetime.entry(id).or_default() += 1;
            }
        }
    }

    let mut states = PlayerMap::new();
    let mut rounds = Vec::with_capacity(dataset.len());
    let mut pair_sum = 0.0f64;
    let mut rank_sum = 0.0f64;
    let mut counted_total = 0u64;
    let mut equal_total = 0u64;

    for (t, record) in dataset.iter().enumerate() {
        let report = process_round(&mut states, &record.to_standings(t), params)?;
        let rows = &report.rows;
        let n = rows.len();
        if n < 2 {
            rounds.push(RoundMetrics {
                contest_id: record.id.clone(),
                index: t,
                participants: n,
                counted: 0,
                pair_inversion_pct: None,
                rank_deviation_pct: None,
            });
            continue;
        }
        let ctx = round_ctx(rows);
        let scored: Vec<(f64, u64, f64)> = (0..n)
            .into_par_iter()
            .filter(|&i| lifetime[rows[i].player_id.as_str()] >= min_contests)
            .map(|i| {
                let (correct, equal) = pair_inversion_counts(rows, i);
                let pair = correct as f64 / (n - 1) as f64 * 100.0;
                let rank = rank_deviation_with(&ctx, n, i);
                (pair, equal, rank)
            })
            .collect();
        let counted = scored.len();
        let mut round_pair = 0.0;
        let mut round_rank = 0.0;
        for (pair, equal, rank) in scored {
            round_pair += pair;
            round_rank += rank;
            equal_total += equal;
        }
        pair_sum += round_pair;
        rank_sum += round_rank;
        counted_total += counted as u64;
        rounds.push(RoundMetrics {
            contest_id: record.id.clone(),
            index: t,
            participants: n,
            counted,
            pair_inversion_pct: (counted > 0).then(|| round_pair / counted as f64),
            rank_deviation_pct: (counted > 0).then(|| round_rank / counted as f64),
        });
    }

    Ok(MetricReport {
        pair_inversion_pct: (counted_total > 0).then(|| pair_sum / counted_total as f64),
        rank_deviation_pct: (counted_total > 0).then(|| rank_sum / counted_total as f64),
        counted_participants: counted_total,
        equal_rating_matchups: equal_total,
        min_contests,
        rounds,
    })
}

/// Which aggregate a grid search optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricSelector {
    /// Higher is better.
    PairInversion,
    /// Lower is better.
    RankDeviation,
}

impl MetricSelector {
    fn score(&self, report: &MetricReport) -> f64 {
        match self {
            // Undefined aggregates rank worst.
            MetricSelector::PairInversion => report.pair_inversion_pct.unwrap_or(f64::NEG_INFINITY),
            MetricSelector::RankDeviation => report
                .rank_deviation_pct
                .map(|v| -v)
                .unwrap_or(f64::NEG_INFINITY),
        }
    }
}

/// A hyperparameter lattice. `expand` walks it in lexicographic
/// (beta, gamma, rho, sigma_newcomer) order after sorting each axis, so the
/// grid-search tie-break (first wins) selects the lexicographically smallest
/// tuple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamGrid {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Ignored for variants without a transfer rate.
    pub rhos: Vec<f64>,
    pub sigma_newcomers: Vec<f64>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            betas: vec![100.0, 200.0, 400.0],
            gammas: vec![20.0, 40.0, 80.0, 160.0],
            rhos: vec![0.1, 1.0],
            sigma_newcomers: vec![250.0, 350.0, 500.0],
        }
    }
}

impl ParamGrid {
    pub fn expand(&self, base: &SystemParams) -> Vec<SystemParams> {
        let mut sorted = self.clone();
        sorted.betas.sort_by(f64::total_cmp);
        sorted.gammas.sort_by(f64::total_cmp);
        sorted.rhos.sort_by(f64::total_cmp);
        sorted.sigma_newcomers.sort_by(f64::total_cmp);
        let rhos: Vec<Option<f64>> = if matches!(base.variant, Variant::Logistic { .. }) {
            sorted.rhos.iter().map(|&r| Some(r)).collect()
        } else {
            vec![None]
        };
        let mut out = Vec::new();
        for &beta in &sorted.betas {
            for &gamma in &sorted.gammas {
                for rho in &rhos {
                    for &sigma in &sorted.sigma_newcomers {
                        let mut p = *base;
                        p.beta = beta;
                        p.gamma = gamma;
                        p.sigma_newcomer = sigma;
                        if let Some(r) = rho {
                            p.variant = Variant::Logistic { rho: *r };
                        }
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

/// Train-split score of one lattice point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainScore {
    pub params: SystemParams,
    pub pair_inversion_pct: Option<f64>,
    pub rank_deviation_pct: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: SystemParams,
    pub best_index: usize,
    pub train_scores: Vec<TrainScore>,
    /// Best point re-evaluated on the train split.
    pub train: MetricReport,
    /// Best point evaluated on the held-out split with fresh state.
    pub test: MetricReport,
}

/// Splits the stream at the 10% round-count mark, scores every lattice point
/// on the first split, and evaluates the winner on the rest with fresh
/// state. Ties keep the earliest lattice point.
pub fn grid_search(
    dataset: &[ContestRecord],
    grid: &[SystemParams],
    selector: MetricSelector,
    min_contests: u32,
) -> Result<GridSearchOutcome, SystemError> {
    if grid.is_empty() {
        return Err(SystemError::InvalidParams("empty parameter grid".into()));
    }
    if dataset.is_empty() {
        return Err(SystemError::InvalidParams("empty dataset".into()));
    }
    let split = (dataset.len() / 10).max(1);
    let (train_rounds, test_rounds) = dataset.split_at(split.min(dataset.len()));

    let train_reports: Vec<MetricReport> = grid
        .par_iter()
        .map(|params| evaluate(train_rounds, params, min_contests))
        .collect::<Result<_, _>>()?;

    let mut best_index = 0;
    for (k, report) in train_reports.iter().enumerate() {
        if selector.score(report) > selector.score(&train_reports[best_index]) {
            best_index = k;
        }
    }

    let train_scores = grid
        .iter()
        .zip(&train_reports)
        .map(|(p, r)| TrainScore {
            params: *p,
            pair_inversion_pct: r.pair_inversion_pct,
            rank_deviation_pct: r.rank_deviation_pct,
        })
        .collect();

    let best = grid[best_index];
    let test = if test_rounds.is_empty() {
        evaluate(&[], &best, min_contests)?
    } else {
        evaluate(test_rounds, &best, min_contests)?
    };
    Ok(GridSearchOutcome {
        best,
        best_index,
        train_scores,
        train: train_reports.into_iter().nth(best_index).expect("in range"),
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(id: &str, group: usize, prior: f64) -> PlayerRoundRow {
        PlayerRoundRow {
            player_id: id.to_string(),
            group,
            prior_mu: prior,
            performance: 0.0,
            new_mu: 0.0,
            new_sigma: 0.0,
        }
    }

    #[test]
    fn perfect_prediction_scores_100() {
        let rows = vec![row("a", 0, 1700.0), row("b", 1, 1600.0), row("c", 2, 1500.0)];
        for i in 0..3 {
            assert_relative_eq!(pair_inversion(i, &rows).unwrap(), 100.0);
            assert_relative_eq!(rank_deviation(i, &rows).unwrap(), 0.0);
        }
    }

    #[test]
    fn inverted_outcome_scores_zero() {
        // Ratings say a > b > c; outcome is c > b > a.
        let rows = vec![row("c", 0, 1500.0), row("b", 1, 1600.0), row("a", 2, 1700.0)];
        // "a" is at index 2: both matchups predicted wrong.
        assert_relative_eq!(pair_inversion(2, &rows).unwrap(), 0.0);
        // "b" gets the b-vs-c and b-vs-a matchups wrong and right respectively.
        assert_relative_eq!(pair_inversion(1, &rows).unwrap(), 50.0);
    }

    #[test]
    fn tie_counts_for_higher_rated() {
        let rows = vec![row("a", 0, 1700.0), row("b", 0, 1600.0)];
        assert_relative_eq!(pair_inversion(0, &rows).unwrap(), 100.0);
        assert_relative_eq!(pair_inversion(1, &rows).unwrap(), 100.0);
    }

    #[test]
    fn two_player_inversion_is_total() {
        let rows = vec![row("low", 0, 1400.0), row("high", 1, 1600.0)];
        assert_relative_eq!(pair_inversion(0, &rows).unwrap(), 0.0);
        assert_relative_eq!(pair_inversion(1, &rows).unwrap(), 0.0);
        assert_relative_eq!(rank_deviation(0, &rows).unwrap(), 100.0);
        assert_relative_eq!(rank_deviation(1, &rows).unwrap(), 100.0);
    }

    #[test]
    fn full_tie_round_has_zero_rank_deviation() {
        let rows = vec![row("a", 0, 1700.0), row("b", 0, 1500.0), row("c", 0, 1600.0)];
        for i in 0..3 {
            assert_relative_eq!(rank_deviation(i, &rows).unwrap(), 0.0);
        }
    }

    #[test]
    fn singleton_round_is_excluded() {
        let rows = vec![row("a", 0, 1700.0)];
        assert!(pair_inversion(0, &rows).is_none());
        assert!(rank_deviation(0, &rows).is_none());
    }

    #[test]
    fn metrics_invariant_under_monotone_rating_transform() {
        let rows = vec![
            row("a", 0, 1650.0),
            row("b", 1, 1580.0),
            row("c", 1, 1700.0),
            row("d", 2, 1300.0),
        ];
        let transformed: Vec<PlayerRoundRow> = rows
            .iter()
            .map(|r| {
                let mut t = r.clone();
                // Strictly increasing map.
                t.prior_mu = (r.prior_mu / 100.0).exp();
                t
            })
            .collect();
        for i in 0..rows.len() {
            assert_eq!(pair_inversion(i, &rows), pair_inversion(i, &transformed));
            assert_eq!(rank_deviation(i, &rows), rank_deviation(i, &transformed));
        }
    }

    fn tiny_dataset() -> Vec<ContestRecord> {
        crate::data::parse_contests_str(
            "c0 : [a] [b] [c]\n\
             c1 : [b] [a] [c]\n\
             c2 : [a] [c] [b]\n\
             c3 : [a] [b] [c]\n\
             c4 : [c] [a] [b]\n\
             c5 : [a] [b] [c]\n",
        )
        .unwrap()
    }

    #[test]
    fn evaluate_threshold_excludes_short_histories() {
        let dataset = tiny_dataset();
        let params = SystemParams::default();
        // Everyone appears 6 times; threshold 7 excludes all.
        let report = evaluate(&dataset, &params, 7).unwrap();
        assert_eq!(report.counted_participants, 0);
        assert!(report.pair_inversion_pct.is_none());
        // Threshold 1 includes everyone in every round.
        let report = evaluate(&dataset, &params, 1).unwrap();
        assert_eq!(report.counted_participants, 18);
        assert!(report.pair_inversion_pct.is_some());
    }

    #[test]
    fn aggregate_is_participant_weighted_mean_of_rounds() {
        let mut dataset = tiny_dataset();
        // Make round sizes differ.
        dataset[3].standings[0].push("z".into());
        let report = evaluate(&dataset, &SystemParams::default(), 1).unwrap();
        let mut num = 0.0;
        let mut den = 0u64;
        for r in &report.rounds {
            if let Some(p) = r.pair_inversion_pct {
                num += p * r.counted as f64;
                den += r.counted as u64;
            }
        }
        assert_eq!(den, report.counted_participants);
        assert_relative_eq!(
            num / den as f64,
            report.pair_inversion_pct.unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn grid_single_point_is_chosen() {
        let dataset = tiny_dataset();
        let grid = vec![SystemParams::default()];
        let out = grid_search(&dataset, &grid, MetricSelector::PairInversion, 1).unwrap();
        assert_eq!(out.best_index, 0);
        assert_eq!(out.train_scores.len(), 1);
    }

    #[test]
    fn grid_picks_dominant_point() {
        // Skills random-walk hard between rounds: a system that refuses to
        // forget (tiny gamma) goes stale and is strictly dominated on the
        // train split by one that tracks the drift.
        let cfg = crate::data::SyntheticConfig {
            num_players: 30,
            num_rounds: 60,
            skill_mean: 1500.0,
            skill_spread: 300.0,
            perf_spread: 50.0,
            drift_spread: 300.0,
            participation: crate::data::Participation::All,
            seed: 5,
        };
        let dataset = crate::data::generate_synthetic(&cfg).contests;
        let mut stale = SystemParams::default();
        stale.gamma = 1e-6;
        let mut tracking = SystemParams::default();
        tracking.gamma = 300.0;
        let out = grid_search(
            &dataset,
            &[stale, tracking],
            MetricSelector::RankDeviation,
            1,
        )
        .unwrap();
        assert_eq!(out.best_index, 1);
        let s = &out.train_scores;
        assert!(s[1].rank_deviation_pct.unwrap() < s[0].rank_deviation_pct.unwrap());
    }

    #[test]
    fn grid_expansion_is_lexicographic() {
        let grid = ParamGrid {
            betas: vec![200.0, 100.0],
            gammas: vec![40.0],
            rhos: vec![1.0, 0.1],
            sigma_newcomers: vec![350.0],
        };
        let expanded = grid.expand(&SystemParams::default());
        assert_eq!(expanded.len(), 4);
        assert_eq!(expanded[0].beta, 100.0);
        assert!(matches!(expanded[0].variant, Variant::Logistic { rho } if rho == 0.1));
        assert_eq!(expanded[3].beta, 200.0);
        // Gaussian variant collapses the rho axis.
        let mut base = SystemParams::default();
        base.variant = Variant::Gaussian;
        assert_eq!(grid.expand(&base).len(), 2);
    }

    #[test]
    fn empty_grid_is_error() {
        let dataset = tiny_dataset();
        assert!(grid_search(&dataset, &[], MetricSelector::PairInversion, 1).is_err());
    }
}
