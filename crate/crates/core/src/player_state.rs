//! Per-player posterior representation and its maintenance.
//!
//! A player's belief is one Gaussian factor plus a chronological list of
//! logistic performance factors. Every factor carries a weight
//! `w_k = omega_k / beta_k^2`, and the cached uncertainty always satisfies
//! `1/sigma^2 = w_0 + sum_k w_k`. The cached rating `mu` is the posterior
//! argmax; this module never solves for it — the engine is the one
//! authority that recomputes it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::system::SystemParams;

/// One logistic posterior factor: a past performance observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceFactor {
    /// Estimated performance `p_k`, in rating units.
    pub center: f64,
    /// Performance-model standard deviation `beta_k` at the time of the round.
    pub scale: f64,
    /// `w_k = omega_k / beta_k^2`; decays with each pseudodiffusion.
    pub weight: f64,
}

impl PerformanceFactor {
    /// Fractional multiplicity `omega_k = w_k * beta_k^2`, in (0, 1] after
    /// any sequence of decays.
    pub fn multiplicity(&self) -> f64 {
        self.weight * self.scale * self.scale
    }
}

/// A player's full posterior belief plus cached summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    /// Gaussian factor center `p_0`.
    pub gaussian_center: f64,
    /// Gaussian factor weight `w_0`.
    pub gaussian_weight: f64,
    /// Logistic factors in chronological order (oldest first).
    pub logistic_factors: VecDeque<PerformanceFactor>,
    /// Cached rating: the posterior argmax, maintained by the engine.
    pub mu: f64,
    /// Cached uncertainty: `1/sqrt(total weight)`.
    pub sigma: f64,
    /// Number of rounds this player has been rated in.
    pub contest_count: u32,
    /// Stream index of the last round that updated this player.
    pub last_update_round: i64,
}

impl PlayerState {
    pub fn total_weight(&self) -> f64 {
        self.gaussian_weight + self.logistic_factors.iter().map(|f| f.weight).sum::<f64>()
    }

    /// Recomputes the sigma cache from the weight sum.
    pub fn refresh_sigma(&mut self) {
        self.sigma = self.total_weight().sqrt().recip();
    }
}

/// Fresh posterior centered on the newcomer prior.
pub fn new_player(params: &SystemParams) -> PlayerState {
    let w0 = (params.sigma_newcomer * params.sigma_newcomer).recip();
    PlayerState {
        gaussian_center: params.mu_newcomer,
        gaussian_weight: w0,
        logistic_factors: VecDeque::new(),
        mu: params.mu_newcomer,
        sigma: params.sigma_newcomer,
        contest_count: 0,
        last_update_round: -1,
    }
}

/// Appends a performance observation with unit multiplicity and refreshes
/// the uncertainty cache. Does not touch the rating cache.
pub fn push_performance(state: &mut PlayerState, perf: f64, beta: f64) {
    assert!(beta > 0.0, "performance scale must be positive");
    state.logistic_factors.push_back(PerformanceFactor {
        center: perf,
        scale: beta,
        weight: (beta * beta).recip(),
    });
    state.contest_count += 1;
    state.refresh_sigma();
}

/// Folds oldest logistic factors into the Gaussian factor until at most
/// `max_len` remain. The merge is precision-weighted, so the total weight
/// (hence sigma) is preserved exactly.
pub fn compress_history(state: &mut PlayerState, max_len: usize) {
    while state.logistic_factors.len() > max_len {
        let oldest = state.logistic_factors.pop_front().expect("nonempty");
        let merged = state.gaussian_weight + oldest.weight;
        state.gaussian_center = (state.gaussian_weight * state.gaussian_center
            + oldest.weight * oldest.center)
            / merged;
        state.gaussian_weight = merged;
    }
}

/// One leaderboard row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSummary {
    pub player_id: String,
    pub mu: f64,
    pub sigma: f64,
    pub contest_count: u32,
}

impl RatingSummary {
    /// The published number; no conservative offset is applied.
    pub fn display(&self) -> f64 {
        self.mu
    }
}
