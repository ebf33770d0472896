//! Scalar root finding for strictly monotone continuous functions.
//!
//! Both solver phases of the rating engine reduce to finding the unique zero
//! of a strictly monotone function, so this is the only numerical kernel in
//! the crate. The solver is the Illinois variant of regula falsi with a
//! bisection fallback, which is derivative-free and superlinear on the
//! smooth tanh-sum functions it is fed.

use thiserror::Error;

/// Hard cap on solver iterations. Forced bisection guarantees the bracket
/// halves at least every other iteration, so this is never reached for any
/// representable tolerance.
const MAX_ITERATIONS: usize = 200;

/// Cap on geometric bracket expansions before giving up.
const MAX_EXPANSIONS: usize = 60;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("bracket failure: {0}")]
    BracketFailure(String),
    #[error("numeric domain error: f({x}) is not finite")]
    NumericDomain { x: f64 },
}

/// An interval known to contain a sign change of the target function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    lo: f64,
    hi: f64,
}

impl Bracket {
    /// Requires `lo < hi`; the sign-change invariant is checked by the solver.
    pub fn new(lo: f64, hi: f64) -> Result<Self, SolveError> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SolveError::BracketFailure(format!(
                "invalid bracket [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, SolveError> {
    let y = f(x);
    if y.is_nan() {
        return Err(SolveError::NumericDomain { x });
    }
    Ok(y)
}

/// Finds the zero of a strictly monotone continuous `f` within `bracket`,
/// to within `tol` of the true zero. Deterministic for identical inputs.
pub fn solve_monotone_zero<F>(f: F, bracket: Bracket, tol: f64) -> Result<f64, SolveError>
where
    F: Fn(f64) -> f64,
{
    assert!(tol > 0.0, "tolerance must be positive");
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let mut fa = eval(&f, a)?;
    let mut fb = eval(&f, b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(SolveError::BracketFailure(format!(
            "no sign change on [{a}, {b}]: f(lo)={fa}, f(hi)={fb}"
        )));
    }

    // Which endpoint was retained last; two retentions in a row trigger a
    // bisection step so the bracket cannot stagnate.
    let mut last_kept: i8 = 0;
    for _ in 0..MAX_ITERATIONS {
        if b - a <= tol {
            break;
        }
        let secant = (a * fb - b * fa) / (fb - fa);
        let force_bisect = last_kept.abs() >= 2 || !secant.is_finite();
        let mut x = if force_bisect {
            0.5 * (a + b)
        } else {
            secant
        };
        // Keep the iterate strictly interior; degenerate steps become bisection.
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        if !(x > a && x < b) {
            // Bracket narrower than float spacing; cannot improve further.
            break;
        }
        let fx = eval(&f, x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            // Illinois: halve the retained endpoint's value to unstick regula falsi.
            if last_kept > 0 {
                fb *= 0.5;
            }
            last_kept = if last_kept > 0 { last_kept + 1 } else { 1 };
        } else {
            b = x;
            fb = fx;
            if last_kept < 0 {
                fa *= 0.5;
            }
            last_kept = if last_kept < 0 { last_kept - 1 } else { -1 };
        }
    }
    Ok(0.5 * (a + b))
}

/// Expands geometrically (doubling) around `seed` until the bracket straddles
/// a sign change of the strictly monotone `f`.
pub fn expand_bracket<F>(f: F, seed: f64, step: f64) -> Result<Bracket, SolveError>
where
    F: Fn(f64) -> f64,
{
    assert!(step > 0.0, "expansion step must be positive");
    let mut width = step;
    for _ in 0..MAX_EXPANSIONS {
        let (lo, hi) = (seed - width, seed + width);
        let flo = eval(&f, lo)?;
        let fhi = eval(&f, hi)?;
        if flo.signum() != fhi.signum() || flo == 0.0 || fhi == 0.0 {
            return Bracket::new(lo, hi);
        }
        width *= 2.0;
    }
    Err(SolveError::BracketFailure(format!(
        "no sign change within {MAX_EXPANSIONS} doublings of {step} around {seed}"
    )))
}

/// Expand-then-solve convenience used by both engine phases.
pub fn solve_from_seed<F>(f: F, seed: f64, step: f64, tol: f64) -> Result<f64, SolveError>
where
    F: Fn(f64) -> f64,
{
    let bracket = expand_bracket(&f, seed, step)?;
    solve_monotone_zero(f, bracket, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: plain bisection driven for 200 iterations.
    fn bisect_oracle<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        assert!(flo.signum() != f(hi).signum());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn linear_zero() {
        let root = solve_monotone_zero(|x| 2.0 * x - 1.0, Bracket::new(0.0, 1.0).unwrap(), 1e-9)
            .unwrap();
        assert!((root - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn shifted_tanh_zero() {
        let root = solve_monotone_zero(
            |x| (x - 3.0).tanh(),
            Bracket::new(-10.0, 10.0).unwrap(),
            1e-9,
        )
        .unwrap();
        assert!((root - 3.0).abs() <= 1e-9);
    }

    #[test]
    fn exp_zero_matches_bisection_oracle() {
        let f = |x: f64| x.exp() - 2.0;
        let oracle = bisect_oracle(f, 0.0, 2.0);
        assert!((oracle - std::f64::consts::LN_2).abs() < 1e-14);
        let root = solve_monotone_zero(f, Bracket::new(0.0, 2.0).unwrap(), 1e-12).unwrap();
        assert!((root - oracle).abs() <= 1e-12);
    }

    #[test]
    fn expand_finds_distant_zero() {
        let b = expand_bracket(|x| x - 100.0, 0.0, 1.0).unwrap();
        assert!(b.lo() <= 100.0 && 100.0 <= b.hi());
    }

    #[test]
    fn expand_decreasing_function() {
        let b = expand_bracket(|x| -(x + 5.0), 0.0, 1.0).unwrap();
        assert!(b.lo() <= -5.0 && -5.0 <= b.hi());
    }

    #[test]
    fn expand_rating_scale_tanh() {
        let f = |x: f64| ((x - 1500.0) / 100.0).tanh();
        let b = expand_bracket(f, 0.0, 100.0).unwrap();
        assert!(f(b.lo()).signum() != f(b.hi()).signum());
        assert!(b.lo() <= 1500.0 && 1500.0 <= b.hi());
    }

    #[test]
    fn expansion_cap_reports_failure() {
        // Strictly positive everywhere: no bracket exists.
        let err = expand_bracket(|x: f64| x.abs() + 1.0, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, SolveError::BracketFailure(_)));
    }

    #[test]
    fn non_finite_evaluation_is_domain_error() {
        let err = solve_monotone_zero(
            |x| if x > 0.25 { f64::NAN } else { x - 0.5 },
            Bracket::new(0.0, 1.0).unwrap(),
            1e-9,
        )
        .unwrap_err();
        assert!(matches!(err, SolveError::NumericDomain { .. }));
    }

    #[test]
    fn no_sign_change_is_bracket_failure() {
        let err =
            solve_monotone_zero(|x| x + 10.0, Bracket::new(0.0, 1.0).unwrap(), 1e-9).unwrap_err();
        assert!(matches!(err, SolveError::BracketFailure(_)));
    }

    #[test]
    fn random_monotone_families_match_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let mut iters_witness = 0usize;
        for _ in 0..200 {
            let center: f64 = rng.random_range(-2000.0..2000.0);
            let scale: f64 = rng.random_range(10.0..500.0);
            let slope: f64 = rng.random_range(1e-4..1e-2);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let f = move |x: f64| sign * (((x - center) / scale).tanh() + slope * (x - center));
            let iters = std::cell::Cell::new(0usize);
            let counted = |x: f64| {
                iters.set(iters.get() + 1);
                f(x)
            };
            let root = solve_from_seed(&counted, center - 3.0 * scale, scale, 1e-9).unwrap();
            iters_witness = iters_witness.max(iters.get());
            let oracle = bisect_oracle(f, center - 10.0 * scale, center + 10.0 * scale);
            assert!(
                (root - oracle).abs() <= 1e-8,
                "root {root} vs oracle {oracle}"
            );
        }
        assert!(iters_witness <= 200, "iteration budget exceeded");
    }

    #[test]
    fn bisection_and_illinois_agree() {
        // Same zero through the pure-bisection oracle and the Illinois path,
        // within 10x the tolerance.
        let f = |x: f64| ((x - 42.0) / 7.0).tanh() + 0.001 * (x - 42.0);
        let tol = 1e-9;
        let root = solve_monotone_zero(f, Bracket::new(-100.0, 200.0).unwrap(), tol).unwrap();
        let oracle = bisect_oracle(f, -100.0, 200.0);
        assert!((root - oracle).abs() <= 10.0 * tol);
    }
}
