//! Skill evolution between rounds.
//!
//! The Gaussian-only variants model drift by adding `gamma^2` to the
//! posterior variance. The full logistic variant cannot do that in closed
//! form, so it uses a pseudodiffusion: every factor's weight decays by a
//! common ratio while a `rho`-controlled fraction of the decayed mass is
//! transferred onto the Gaussian factor, centered at the current rating so
//! the posterior argmax is preserved. Total weight scales by exactly
//! `kappa = (1 + gamma^2/sigma^2)^-1`, which is what grows sigma by the
//! intended amount.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::player_state::PlayerState;

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("variant mismatch: gaussian diffusion requires a gaussian-only state ({factors} logistic factors present)")]
    VariantMismatch { factors: usize },
}

/// Pseudodiffusion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    /// Skill increment standard deviation per participated round.
    pub gamma: f64,
    /// Transfer-to-decay rate ratio; `f64::INFINITY` collapses all history.
    pub rho: f64,
}

impl DriftParams {
    pub fn new(gamma: f64, rho: f64) -> Self {
        assert!(gamma >= 0.0, "gamma must be nonnegative");
        assert!(rho >= 0.0, "rho must be nonnegative");
        Self { gamma, rho }
    }
}

/// Applies one pseudodiffusion step. The rating cache is intentionally left
/// untouched: transfer mass is centered at `mu`, which preserves the argmax.
///
/// The transfer mass is drawn from the total weight over all factors,
/// including the Gaussian one; only that reading scales the total weight by
/// exactly `kappa`.
pub fn diffuse(state: &mut PlayerState, params: DriftParams) {
    if params.gamma == 0.0 {
        return;
    }
    let kappa = (1.0 + (params.gamma / state.sigma) * (params.gamma / state.sigma)).recip();
    // IEEE powf gives the intended limits at rho = inf: kappa^inf = 0 for
    // kappa < 1 and 1^inf = 1.
    let kappa_rho = kappa.powf(params.rho);
    let logistic_weight: f64 = state.logistic_factors.iter().map(|f| f.weight).sum();
    let transfer_gaussian = kappa_rho * state.gaussian_weight;
    let transfer_logistic = (1.0 - kappa_rho) * (state.gaussian_weight + logistic_weight);
    let combined = transfer_gaussian + transfer_logistic;
    state.gaussian_center =
        (transfer_gaussian * state.gaussian_center + transfer_logistic * state.mu) / combined;
    state.gaussian_weight = kappa * combined;
    let factor_decay = kappa * kappa_rho;
    for f in state.logistic_factors.iter_mut() {
        f.weight *= factor_decay;
    }
    // Fully transferred factors carry nothing and would violate the
    // positive-weight invariant.
    state.logistic_factors.retain(|f| f.weight > 0.0);
    state.sigma /= kappa.sqrt();
}

/// Gaussian drift for the memoryless variants: variance grows by `gamma^2`.
pub fn diffuse_gaussian(state: &mut PlayerState, gamma: f64) -> Result<(), DriftError> {
    if !state.logistic_factors.is_empty() {
        return Err(DriftError::VariantMismatch {
            factors: state.logistic_factors.len(),
        });
    }
    if gamma == 0.0 {
        return Ok(());
    }
    let variance = state.sigma * state.sigma + gamma * gamma;
    state.gaussian_weight = variance.recip();
    state.sigma = variance.sqrt();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::player_state::{new_player, push_performance, PerformanceFactor};
    use crate::system::SystemParams;
    use approx::assert_relative_eq;

    #[test]
    fn kappa_gives_pythagorean_sigma() {
        let mut s = new_player(&SystemParams::default());
        s.sigma = 80.0;
        s.gaussian_weight = 80.0f64.powi(-2);
        s.mu = s.gaussian_center;
        diffuse(&mut s, DriftParams::new(60.0, 1.0));
        assert_relative_eq!(s.sigma, 100.0, max_relative = 1e-14);
    }

    #[test]
    fn hand_evaluated_transfer() {
        // w_0 = 1, two logistic factors with weights 1 apiece, kappa = 0.64.
        let mut s = new_player(&SystemParams::default());
        s.gaussian_center = 1000.0;
        s.gaussian_weight = 1.0;
        s.mu = 1200.0;
        s.sigma = 80.0;
        for _ in 0..2 {
            s.logistic_factors.push_back(PerformanceFactor {
                center: 1300.0,
                scale: 1.0,
                weight: 1.0,
            });
        }
        diffuse(&mut s, DriftParams::new(60.0, 1.0));
        // w_G = 0.64, w_L = 0.36 * 3 = 1.08
        let p0 = (0.64 * 1000.0 + 1.08 * 1200.0) / 1.72;
        assert_relative_eq!(s.gaussian_center, p0, max_relative = 1e-14);
        assert_relative_eq!(s.gaussian_weight, 0.64 * 1.72, max_relative = 1e-14);
        for f in &s.logistic_factors {
            assert_relative_eq!(f.weight, 0.4096, max_relative = 1e-14);
        }
        // Total weight scales by exactly kappa.
        assert_relative_eq!(s.total_weight(), 0.64 * 3.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_gamma_is_bitwise_noop() {
        let mut s = new_player(&SystemParams::default());
        push_performance(&mut s, 1450.0, 210.0);
        let before = s.clone();
        diffuse(&mut s, DriftParams::new(0.0, 2.0));
        assert_eq!(s, before);
    }

    #[test]
    fn infinite_rho_collapses_history() {
        let mut s = new_player(&SystemParams::default());
        push_performance(&mut s, 1700.0, 150.0);
        push_performance(&mut s, 1650.0, 150.0);
        s.mu = 1640.0;
        let total_before = s.total_weight();
        let sigma_before = s.sigma;
        diffuse(&mut s, DriftParams::new(50.0, f64::INFINITY));
        assert!(s.logistic_factors.is_empty());
        assert_eq!(s.gaussian_center, 1640.0);
        let kappa = 1.0 / (1.0 + (50.0 / sigma_before) * (50.0 / sigma_before));
        assert_relative_eq!(s.gaussian_weight, kappa * total_before, max_relative = 1e-13);
    }

    #[test]
    fn gaussian_drift_pythagorean() {
        let mut s = new_player(&SystemParams::default());
        s.sigma = 300.0;
        s.gaussian_weight = 300.0f64.powi(-2);
        diffuse_gaussian(&mut s, 400.0).unwrap();
        assert_relative_eq!(s.sigma, 500.0, max_relative = 1e-15);
        assert_relative_eq!(s.gaussian_weight, 500.0f64.powi(-2), max_relative = 1e-15);
    }

    #[test]
    fn gaussian_drift_zero_is_identity() {
        let mut s = new_player(&SystemParams::default());
        let before = s.clone();
        diffuse_gaussian(&mut s, 0.0).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn gaussian_drift_composes() {
        let mut a = new_player(&SystemParams::default());
        let mut b = a.clone();
        for _ in 0..10 {
            diffuse_gaussian(&mut a, 35.0).unwrap();
        }
        diffuse_gaussian(&mut b, 35.0 * 10.0f64.sqrt()).unwrap();
        assert_relative_eq!(a.sigma, b.sigma, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_drift_rejects_history() {
        let mut s = new_player(&SystemParams::default());
        push_performance(&mut s, 1500.0, 100.0);
        let err = diffuse_gaussian(&mut s, 35.0).unwrap_err();
        assert!(matches!(err, DriftError::VariantMismatch { factors: 1 }));
    }
}
