//! Round orchestration: the public rating-system interface.
//!
//! Rounds are strictly sequential; within a round the update runs in four
//! barrier-separated steps so worker count can never change the output:
//! initialize newcomers, diffuse every participant, snapshot the prior view,
//! then phase one and phase two in parallel across players.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift::{diffuse, diffuse_gaussian, DriftError, DriftParams};
use crate::engine::{
    estimate_performance, subsample_opponents, update_belief, EngineError, RoundView,
    SubsampleMode, Variant, ViewEntry,
};
use crate::player_state::{compress_history, new_player, PlayerState, RatingSummary};

pub type PlayerMap = BTreeMap<String, PlayerState>;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid contest {contest_id}: {msg}")]
    InvalidContest { contest_id: String, msg: String },
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Full hyperparameter set of the rating system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub variant: Variant,
    /// Default performance-model standard deviation per contest.
    pub beta: f64,
    /// Skill drift standard deviation per participated round.
    pub gamma: f64,
    pub mu_newcomer: f64,
    pub sigma_newcomer: f64,
    /// Solver tolerance, in rating units.
    pub tol: f64,
    /// Phase-one opponent cap.
    pub subsample_cap: usize,
    pub subsample_mode: SubsampleMode,
    /// Maximum retained logistic factors per player.
    pub history_cap: usize,
    /// Tie handling (w_l, w_v): (1, 1) counts a tie as a win plus a loss,
    /// (0.5, 0.5) as half a win plus half a loss.
    pub tie_weights: (f64, f64),
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            variant: Variant::Logistic { rho: 1.0 },
            beta: 200.0,
            gamma: 80.0,
            mu_newcomer: 1500.0,
            sigma_newcomer: 350.0,
            tol: 1e-9,
            subsample_cap: 500,
            subsample_mode: SubsampleMode::PerPlayer,
            history_cap: 500,
            tie_weights: (1.0, 1.0),
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), SystemError> {
        let fail = |msg: String| Err(SystemError::InvalidParams(msg));
        if !(self.beta > 0.0) {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.gamma >= 0.0) {
            return fail(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        if !(self.sigma_newcomer > 0.0) {
            return fail(format!(
                "sigma_newcomer must be positive, got {}",
                self.sigma_newcomer
            ));
        }
        if !self.mu_newcomer.is_finite() {
            return fail(format!("mu_newcomer must be finite, got {}", self.mu_newcomer));
        }
        if !(self.tol > 0.0) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if self.subsample_cap == 0 {
            return fail("subsample_cap must be at least 1".into());
        }
        if self.history_cap == 0 {
            return fail("history_cap must be at least 1".into());
        }
        let (w_l, w_v) = self.tie_weights;
        if !(0.0..=1.0).contains(&w_l) || !(0.0..=1.0).contains(&w_v) {
            return fail(format!("tie weights must lie in [0,1], got ({w_l}, {w_v})"));
        }
        if (w_l - w_v).abs() >= 1.0 {
            return fail(format!(
                "tie weights must satisfy |w_l - w_v| < 1, got ({w_l}, {w_v})"
            ));
        }
        if let Variant::Logistic { rho } = self.variant {
            if !(rho > 0.0) || !rho.is_finite() {
                return fail(format!("rho must be positive and finite, got {rho}"));
            }
        }
        Ok(())
    }
}

/// One round's ranked outcome: tie-groups in finish order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestStandings {
    pub contest_id: String,
    /// Position in the round stream.
    pub index: usize,
    /// Ordered tie-groups; first group finished first.
    pub standings: Vec<Vec<String>>,
    /// Per-contest performance scale override.
    pub beta_override: Option<f64>,
}

pub fn valid_player_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| !c.is_whitespace() && c != '[' && c != ']' && c != ':' && c != '#')
}

impl ContestStandings {
    pub fn validate(&self) -> Result<(), SystemError> {
        let fail = |msg: String| {
            Err(SystemError::InvalidContest {
                contest_id: self.contest_id.clone(),
                msg,
            })
        };
        if self.standings.is_empty() {
            return fail("no tie-groups".into());
        }
        if let Some(b) = self.beta_override {
            if !(b > 0.0) {
                return fail(format!("beta override must be positive, got {b}"));
            }
        }
        let mut seen = HashSet::new();
        for (g, group) in self.standings.iter().enumerate() {
            if group.is_empty() {
                return fail(format!("tie-group {g} is empty"));
            }
            for id in group {
                if !valid_player_id(id) {
                    return fail(format!("invalid player id {id:?}"));
                }
                if !seen.insert(id.as_str()) {
                    return fail(format!("duplicate player {id}"));
                }
            }
        }
        Ok(())
    }

    pub fn participant_count(&self) -> usize {
        self.standings.iter().map(|g| g.len()).sum()
    }
}

/// Per-player outcome of one processed round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlayerRoundRow {
    pub player_id: String,
    pub group: usize,
    /// Post-diffusion prior rating the round was predicted from.
    pub prior_mu: f64,
    /// Phase-one performance estimate.
    pub performance: f64,
    pub new_mu: f64,
    pub new_sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundReport {
    pub contest_id: String,
    pub index: usize,
    /// Rows in standings order (ids sorted within a tie-group).
    pub rows: Vec<PlayerRoundRow>,
}

struct Work {
    id: String,
    group: usize,
    state: PlayerState,
}

/// Processes one round: initializes newcomers, diffuses, estimates
/// performances from the post-diffusion snapshot, and updates every
/// participant's posterior. Non-participants are untouched.
///
/// Validation failures are reported before any state mutation. A solver
/// failure mid-round (not observed in practice: the self-tie term guarantees
/// an interior zero) aborts the round with participants left diffused.
pub fn process_round(
    states: &mut PlayerMap,
    contest: &ContestStandings,
    params: &SystemParams,
) -> Result<RoundReport, SystemError> {
    params.validate()?;
    contest.validate()?;
    let beta_t = contest.beta_override.unwrap_or(params.beta);

    // Standings order with ids sorted inside each tie-group, so downstream
    // work is independent of input set ordering.
    let mut roster: Vec<(String, usize)> = Vec::with_capacity(contest.participant_count());
    for (g, group) in contest.standings.iter().enumerate() {
        let mut ids: Vec<&String> = group.iter().collect();
        ids.sort_unstable();
        roster.extend(ids.into_iter().map(|id| (id.clone(), g)));
    }

    let mut working: Vec<Work> = roster
        .into_iter()
        .map(|(id, group)| {
            let state = states.remove(&id).unwrap_or_else(|| new_player(params));
            Work { id, group, state }
        })
        .collect();

    let outcome = run_round(&mut working, contest, params, beta_t);
    for w in working {
        states.insert(w.id, w.state);
    }
    Ok(RoundReport {
        contest_id: contest.contest_id.clone(),
        index: contest.index,
        rows: outcome?,
    })
}

fn run_round(
    working: &mut [Work],
    contest: &ContestStandings,
    params: &SystemParams,
    beta_t: f64,
) -> Result<Vec<PlayerRoundRow>, SystemError> {
    // Diffuse everyone, newcomers included.
    match params.variant {
        Variant::Logistic { rho } => {
            let drift = DriftParams::new(params.gamma, rho);
            working
                .par_iter_mut()
                .for_each(|w| diffuse(&mut w.state, drift));
        }
        Variant::Gaussian | Variant::MemorylessLogistic => {
            working
                .par_iter_mut()
                .map(|w| diffuse_gaussian(&mut w.state, params.gamma))
                .collect::<Result<Vec<()>, DriftError>>()?;
        }
    }

    // Immutable prior snapshot shared by all phase-one workers.
    let entries: Vec<ViewEntry> = working
        .iter()
        .map(|w| {
            let delta = (w.state.sigma * w.state.sigma + beta_t * beta_t).sqrt();
            ViewEntry::new(w.id.clone(), w.state.mu, delta, w.group)
        })
        .collect();
    let view = RoundView::new(entries)?;

    let model = params.variant.perf_model();
    let performances: Vec<f64> = (0..working.len())
        .into_par_iter()
        .map(|i| {
            let opponents =
                subsample_opponents(&view, i, params.subsample_cap, params.subsample_mode);
            estimate_performance(&view, i, &opponents, model, params.tie_weights, params.tol)
        })
        .collect::<Result<Vec<f64>, EngineError>>()?;

    let round_index = contest.index as i64;
    working
        .par_iter_mut()
        .zip(performances.par_iter())
        .map(|(w, &perf)| {
            update_belief(&mut w.state, perf, beta_t, params.variant, params.tol)?;
            if params.variant.keeps_history() {
                compress_history(&mut w.state, params.history_cap);
            }
            w.state.last_update_round = round_index;
            Ok(())
        })
        .collect::<Result<Vec<()>, EngineError>>()?;

    let rows = working
        .iter()
        .zip(view.entries())
        .zip(performances)
        .map(|((w, entry), performance)| PlayerRoundRow {
            player_id: w.id.clone(),
            group: w.group,
            prior_mu: entry.prior_mu,
            performance,
            new_mu: w.state.mu,
            new_sigma: w.state.sigma,
        })
        .collect();
    Ok(rows)
}

/// Leaderboard: rating descending, ties by id ascending.
pub fn rating_summary(states: &PlayerMap) -> Vec<RatingSummary> {
    let mut rows: Vec<RatingSummary> = states
        .iter()
        .map(|(id, s)| RatingSummary {
            player_id: id.clone(),
            mu: s.mu,
            sigma: s.sigma,
            contest_count: s.contest_count,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mu.total_cmp(&a.mu)
            .then_with(|| a.player_id.cmp(&b.player_id))
    });
    rows
}
