//! Closed-form densities, CDFs, and the loss/draw/victory functions for the
//! Gaussian and logistic performance models.
//!
//! The loss/draw/victory triple (`l`, `d`, `v`) collects the logarithmic
//! derivatives of the survival function, density, and CDF. They are the
//! per-opponent contributions to the performance equation: an opponent who
//! beat you contributes `l`, one you tied contributes `d`, one you beat
//! contributes `v`. For log-concave families all three are strictly
//! decreasing with `l < d < v` everywhere, which is what makes the
//! performance equation solvable by monotone root finding.
//!
//! Scale conventions: every constructor takes the distribution's standard
//! deviation. The logistic's natural (tanh) scale is derived internally as
//! `scale_bar = sqrt(3)/pi * std_dev`, so this module is the single place
//! where that conversion lives.

use std::f64::consts::PI;

/// sqrt(3)/pi: converts a logistic standard deviation to its natural scale.
pub const LOGISTIC_SCALE_RATIO: f64 = 0.551_328_895_421_792_1;

/// Natural (tanh) scale of a logistic distribution with the given std dev.
pub fn natural_scale(std_dev: f64) -> f64 {
    LOGISTIC_SCALE_RATIO * std_dev
}

/// Location/scale parameters of a logistic distribution, stored on its
/// natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticSpec {
    pub mu: f64,
    /// Natural scale; the distribution's variance is `(pi^2/3) * scale_bar^2`.
    pub scale_bar: f64,
}

impl LogisticSpec {
    pub fn new(mu: f64, scale_bar: f64) -> Self {
        assert!(scale_bar > 0.0, "logistic scale must be positive");
        Self { mu, scale_bar }
    }

    /// Moment-matched construction from a standard deviation.
    pub fn from_std(mu: f64, std_dev: f64) -> Self {
        Self::new(mu, natural_scale(std_dev))
    }

    pub fn variance(&self) -> f64 {
        (PI * PI / 3.0) * self.scale_bar * self.scale_bar
    }
}

/// Location/scale parameters of a Gaussian distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(mu: f64, sigma: f64) -> Self {
        assert!(sigma > 0.0, "gaussian sigma must be positive");
        Self { mu, sigma }
    }
}

/// Numerically stable sigmoid: full relative precision in both tails.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic CDF, `1/(1 + exp(-(x-mu)/scale_bar))`.
pub fn logistic_cdf(x: f64, spec: LogisticSpec) -> f64 {
    sigmoid((x - spec.mu) / spec.scale_bar)
}

/// Logistic density, `sech^2((x-mu)/(2 scale_bar)) / (4 scale_bar)`.
pub fn logistic_pdf(x: f64, spec: LogisticSpec) -> f64 {
    let q = (x - spec.mu) / spec.scale_bar;
    sigmoid(q) * sigmoid(-q) / spec.scale_bar
}

/// Loss/draw/victory functions of the logistic model.
///
/// `l = -F/scale_bar`, `v = (1-F)/scale_bar`, and the draw term is their
/// exact sum: a tie counts as a win plus a loss.
pub fn ldv_logistic(x: f64, spec: LogisticSpec) -> (f64, f64, f64) {
    let q = (x - spec.mu) / spec.scale_bar;
    let l = -sigmoid(q) / spec.scale_bar;
    let v = sigmoid(-q) / spec.scale_bar;
    (l, l + v, v)
}

/// Standard normal density.
fn phi(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF via the complementary error function.
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Beyond this many standard deviations the CDF ratio switches to the
/// continued-fraction form of the Mills ratio.
const HAZARD_TAIL_SWITCH: f64 = 6.0;

/// `phi(u) / Phi(-u)` for `u >= HAZARD_TAIL_SWITCH`, where the direct ratio
/// would lose precision and eventually underflow to 0/0.
///
/// Uses the Laplace continued fraction `Phi(-u)/phi(u) = 1/(u+1/(u+2/(u+...)))`,
/// evaluated bottom-up; 64 levels give full double precision for u >= 6.
fn mills_hazard_tail(u: f64) -> f64 {
    let mut t = u;
    for j in (1..=64).rev() {
        t = u + j as f64 / t;
    }
    t
}

/// `f(x)/F(x)` for the Gaussian: the inverse Mills ratio, stable far into
/// the lower tail (at least 40 sigma).
fn gaussian_hazard(z: f64) -> f64 {
    if z < -HAZARD_TAIL_SWITCH {
        mills_hazard_tail(-z)
    } else {
        phi(z) / std_normal_cdf(z)
    }
}

/// Loss/draw/victory functions of the Gaussian model.
///
/// `v = f/F`, `l = -f/(1-F)`, `d = -(x-mu)/sigma^2`, computed through
/// tail-stable CDF ratios so the performance equation stays strictly
/// monotone even for opponents 40 sigma away.
pub fn ldv_gaussian(x: f64, spec: GaussianSpec) -> (f64, f64, f64) {
    let z = (x - spec.mu) / spec.sigma;
    let v = gaussian_hazard(z) / spec.sigma;
    // Reflection: -f(x)/(1-F(x)) is the mirrored victory term.
    let l = -gaussian_hazard(-z) / spec.sigma;
    let d = -z / spec.sigma;
    (l, d, v)
}
