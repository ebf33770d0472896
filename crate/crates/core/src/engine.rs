//! The two-phase round update.
//!
//! Phase one estimates each participant's performance for the round: the
//! unique zero of a strictly decreasing sum of loss/draw/victory terms, one
//! per (sub)sampled opponent plus a self-tie term. Phase two folds that
//! estimate into the player's posterior and re-solves for the rating.
//!
//! Phase one reads a shared immutable [`RoundView`] snapshot; phase two
//! mutates each [`PlayerState`] exclusively. Both are safe to run in
//! parallel across players.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{ldv_gaussian, natural_scale, GaussianSpec};
use crate::numerics::{self, SolveError};
use crate::player_state::{push_performance, PlayerState};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid round view: {0}")]
    InvalidView(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Which distribution family models round performances in phase one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerfModel {
    Gaussian,
    Logistic,
}

/// Rating-system variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    /// Gaussian performance model; the posterior stays a single Gaussian.
    Gaussian,
    /// Logistic performance model with a full factor history; `rho` is the
    /// pseudodiffusion transfer-to-decay ratio.
    Logistic { rho: f64 },
    /// Logistic performance model, memoryless: the posterior collapses to a
    /// Gaussian after every round.
    MemorylessLogistic,
}

impl Variant {
    pub fn perf_model(&self) -> PerfModel {
        match self {
            Variant::Gaussian => PerfModel::Gaussian,
            _ => PerfModel::Logistic,
        }
    }

    /// Whether the posterior keeps logistic factors across rounds.
    pub fn keeps_history(&self) -> bool {
        matches!(self, Variant::Logistic { .. })
    }
}

/// One participant in the round snapshot.
#[derive(Debug, Clone)]
pub struct ViewEntry {
    pub id: String,
    /// Prior rating, after diffusion.
    pub prior_mu: f64,
    /// Combined performance scale `sqrt(sigma^2 + beta_t^2)`.
    pub delta: f64,
    /// Tie-group index, 0 = first place.
    pub group: usize,
    // Cached logistic-model constants for the hot phase-one loop.
    tanh_arg: f64,
    term_out: f64,
}

impl ViewEntry {
    pub fn new(id: String, prior_mu: f64, delta: f64, group: usize) -> Self {
        let bar = natural_scale(delta);
        Self {
            id,
            prior_mu,
            delta,
            group,
            tanh_arg: (2.0 * bar).recip(),
            term_out: bar.recip(),
        }
    }
}

/// Immutable snapshot of one round: participants in standings order, with
/// contiguous tie-group indices.
#[derive(Debug, Clone)]
pub struct RoundView {
    entries: Vec<ViewEntry>,
    /// Rank of each entry's id in id-sorted order; deterministic tie-break key.
    id_rank: Vec<u32>,
}

impl RoundView {
    pub fn new(entries: Vec<ViewEntry>) -> Result<Self, EngineError> {
        if entries.is_empty() {
            return Err(EngineError::InvalidView("no participants".into()));
        }
        // Groups must start at 0, be non-decreasing, and increase by at most
        // one: entries are in standings order.
        let mut current = 0usize;
        for (k, e) in entries.iter().enumerate() {
            if !(e.delta > 0.0) || !e.prior_mu.is_finite() {
                return Err(EngineError::InvalidView(format!(
                    "participant {} has invalid prior ({}, {})",
                    e.id, e.prior_mu, e.delta
                )));
            }
            if k == 0 {
                if e.group != 0 {
                    return Err(EngineError::InvalidView("first group must be 0".into()));
                }
            } else if e.group != current && e.group != current + 1 {
                return Err(EngineError::InvalidView(format!(
                    "tie-group index {} out of order at position {k}",
                    e.group
                )));
            }
            current = e.group;
        }
        let mut order: Vec<u32> = (0..entries.len() as u32).collect();
        order.sort_by(|&a, &b| entries[a as usize].id.cmp(&entries[b as usize].id));
        let mut id_rank = vec![0u32; entries.len()];
        for (rank, idx) in order.into_iter().enumerate() {
            id_rank[idx as usize] = rank as u32;
        }
        Ok(Self { entries, id_rank })
    }

    pub fn entries(&self) -> &[ViewEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// How phase one picks opponents when the field exceeds the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SubsampleMode {
    /// Opponents nearest to each player's own prior rating. Fastest and the
    /// experimental default, but aligned incentives hold only approximately.
    #[default]
    PerPlayer,
    /// One shared subset nearest the field median, so every player faces the
    /// same opposition and incentive alignment is exact.
    Global,
}

/// Partition of the sampled opponents by outcome against player `i`.
/// `tied_with` includes `i` itself: the self-tie term is what guarantees the
/// performance equation an interior zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceSplit {
    pub lost_to: Vec<usize>,
    pub tied_with: Vec<usize>,
    pub won_against: Vec<usize>,
}

pub fn evidence_split(view: &RoundView, i: usize, opponents: &[usize]) -> EvidenceSplit {
    let g = view.entries[i].group;
    let mut split = EvidenceSplit {
        lost_to: Vec::new(),
        tied_with: vec![i],
        won_against: Vec::new(),
    };
    for &j in opponents {
        let gj = view.entries[j].group;
        if gj < g {
            split.lost_to.push(j);
        } else if gj > g {
            split.won_against.push(j);
        } else if j != i {
            split.tied_with.push(j);
        }
    }
    split
}

/// Selects up to `cap` opponents of `i` (indices into the view, ascending).
///
/// Nearest-by-prior-rating with ties broken by player id, so the result is
/// invariant to input permutation. In per-player mode at least one opponent
/// from each side of `i`'s rank is retained whenever one exists (the result
/// may then exceed `cap` by one when `cap` is tiny).
pub fn subsample_opponents(
    view: &RoundView,
    i: usize,
    cap: usize,
    mode: SubsampleMode,
) -> Vec<usize> {
    assert!(cap >= 1, "subsample cap must be at least 1");
    let n = view.len();
    if n <= 1 {
        return Vec::new();
    }
    if n - 1 <= cap {
        let mut all: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        all.sort_unstable();
        return all;
    }
    let anchor = match mode {
        SubsampleMode::PerPlayer => view.entries[i].prior_mu,
        SubsampleMode::Global => {
            // Lower median by (rating, id) order.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_unstable_by(|&a, &b| {
                view.entries[a]
                    .prior_mu
                    .total_cmp(&view.entries[b].prior_mu)
                    .then(view.id_rank[a].cmp(&view.id_rank[b]))
            });
            view.entries[order[(n - 1) / 2]].prior_mu
        }
    };
    let key = |j: usize| ((view.entries[j].prior_mu - anchor).abs(), view.id_rank[j]);
    let cmp = |a: &usize, b: &usize| {
        let (da, ra) = key(*a);
        let (db, rb) = key(*b);
        da.total_cmp(&db).then(ra.cmp(&rb))
    };
    let mut candidates: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let mut picked: Vec<usize>;
    match mode {
        SubsampleMode::Global => {
            candidates.select_nth_unstable_by(cap - 1, cmp);
            picked = candidates[..cap].to_vec();
        }
        SubsampleMode::PerPlayer => {
            let g = view.entries[i].group;
            let best_on = |side_better: bool| {
                (0..n)
                    .filter(|&j| {
                        j != i
                            && if side_better {
                                view.entries[j].group < g
                            } else {
                                view.entries[j].group > g
                            }
                    })
                    .min_by(|a, b| cmp(a, b))
            };
            let forced: Vec<usize> = [best_on(true), best_on(false)]
                .into_iter()
                .flatten()
                .collect();
            let quota = cap.saturating_sub(forced.len());
            candidates.retain(|j| !forced.contains(j));
            if candidates.len() > quota {
                if quota > 0 {
                    candidates.select_nth_unstable_by(quota - 1, cmp);
                }
                candidates.truncate(quota);
            }
            picked = candidates;
            picked.extend_from_slice(&forced);
        }
    }
    picked.sort_unstable();
    picked
}

/// Sum of loss/draw/victory terms for player `i` at candidate performance `x`.
fn performance_objective(
    view: &RoundView,
    i: usize,
    opponents: &[usize],
    model: PerfModel,
    tie_weights: (f64, f64),
    x: f64,
) -> f64 {
    let g = view.entries[i].group;
    let (w_l, w_v) = tie_weights;
    let mut acc = 0.0;
    match model {
        PerfModel::Logistic => {
            for &j in opponents {
                let e = &view.entries[j];
                let t = ((x - e.prior_mu) * e.tanh_arg).tanh();
                acc += if e.group < g {
                    // Lost to j: l = -(1+T)/2 / scale_bar.
                    -0.5 * (1.0 + t) * e.term_out
                } else if e.group > g {
                    // Beat j: v = (1-T)/2 / scale_bar.
                    0.5 * (1.0 - t) * e.term_out
                } else {
                    0.5 * (w_v * (1.0 - t) - w_l * (1.0 + t)) * e.term_out
                };
            }
            let e = &view.entries[i];
            let t = ((x - e.prior_mu) * e.tanh_arg).tanh();
            acc += 0.5 * (w_v * (1.0 - t) - w_l * (1.0 + t)) * e.term_out;
        }
        PerfModel::Gaussian => {
            for &j in opponents {
                let e = &view.entries[j];
                let (l, _, v) = ldv_gaussian(x, GaussianSpec::new(e.prior_mu, e.delta));
                acc += if e.group < g {
                    l
                } else if e.group > g {
                    v
                } else {
                    w_l * l + w_v * v
                };
            }
            let e = &view.entries[i];
            let (l, _, v) = ldv_gaussian(x, GaussianSpec::new(e.prior_mu, e.delta));
            acc += w_l * l + w_v * v;
        }
    }
    acc
}

/// Phase one: the performance estimate for player `i` against the given
/// opponents (plus the implicit self-tie). The objective is strictly
/// decreasing, and the self-tie term guarantees an interior zero.
pub fn estimate_performance(
    view: &RoundView,
    i: usize,
    opponents: &[usize],
    model: PerfModel,
    tie_weights: (f64, f64),
    tol: f64,
) -> Result<f64, EngineError> {
    let seed = view.entries[i].prior_mu;
    let step = view.entries[i].delta;
    let f = |x: f64| performance_objective(view, i, opponents, model, tie_weights, x);
    Ok(numerics::solve_from_seed(f, seed, step, tol)?)
}

/// Phase one against the full field, without subsampling.
pub fn estimate_performance_full(
    view: &RoundView,
    i: usize,
    model: PerfModel,
    tie_weights: (f64, f64),
    tol: f64,
) -> Result<f64, EngineError> {
    let opponents: Vec<usize> = (0..view.len()).filter(|&j| j != i).collect();
    estimate_performance(view, i, &opponents, model, tie_weights, tol)
}

/// Derivative of the negative log-posterior: zero at the rating.
pub fn rating_objective(state: &PlayerState, s: f64) -> f64 {
    let mut acc = state.gaussian_weight * (s - state.gaussian_center);
    for f in &state.logistic_factors {
        let bar = natural_scale(f.scale);
        let coeff = f.weight * f.scale * f.scale / bar;
        acc += coeff * ((s - f.center) / (2.0 * bar)).tanh();
    }
    acc
}

/// Re-solves the rating cache from the current factor set.
pub fn solve_rating(state: &PlayerState, tol: f64) -> Result<f64, SolveError> {
    let step = state.sigma.max(1.0);
    numerics::solve_from_seed(|s| rating_objective(state, s), state.mu, step, tol)
}

/// Phase two: absorb the performance estimate into the posterior and update
/// the cached rating and uncertainty.
pub fn update_belief(
    state: &mut PlayerState,
    perf: f64,
    beta_t: f64,
    variant: Variant,
    tol: f64,
) -> Result<(), EngineError> {
    assert!(perf.is_finite(), "performance estimate must be finite");
    match variant {
        Variant::Gaussian => {
            let w_new = (beta_t * beta_t).recip();
            let merged = state.gaussian_weight + w_new;
            state.gaussian_center =
                (state.gaussian_weight * state.gaussian_center + w_new * perf) / merged;
            state.gaussian_weight = merged;
            state.mu = state.gaussian_center;
            state.contest_count += 1;
            state.refresh_sigma();
        }
        Variant::Logistic { .. } => {
            push_performance(state, perf, beta_t);
            state.mu = solve_rating(state, tol)?;
        }
        Variant::MemorylessLogistic => {
            push_performance(state, perf, beta_t);
            state.mu = solve_rating(state, tol)?;
            // Collapse to a Gaussian centered at the new rating; the total
            // weight (hence sigma) is preserved.
            let folded = state.logistic_factors.drain(..).map(|f| f.weight).sum::<f64>();
            state.gaussian_weight += folded;
            state.gaussian_center = state.mu;
        }
    }
    Ok(())
}

/// The rating restated as a weighted mean of factor centers: the weight each
/// factor effectively contributes at the current rating. Diagnostic only.
/// Entry 0 is the Gaussian factor; entries k >= 1 follow history order.
pub fn robust_average_weights(state: &PlayerState) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(state.logistic_factors.len() + 1);
    out.push((0, state.gaussian_weight));
    for (k, f) in state.logistic_factors.iter().enumerate() {
        let bar = natural_scale(f.scale);
        let omega = f.multiplicity();
        let t = (state.mu - f.center) / (2.0 * bar);
        let ratio = if t.abs() < 1e-6 {
            1.0 - t * t / 3.0
        } else {
            t.tanh() / t
        };
        out.push((k + 1, omega * ratio / (2.0 * bar * bar)));
    }
    out
}
