//! Principal branch W₀ of the Lambert W function.
//!
//! W₀ is the inverse of `w ↦ w·eʷ` restricted to `w ≥ −1`; it is defined for
//! arguments `x ≥ −1/e` and satisfies the round-trip identity
//! `W₀(α·e^α) = α` for every `α ≥ −1`. The surface-binding pulse response is
//! written in closed form through W₀, and that identity is what pins the
//! response to exactly zero at the adsorption onset, so the evaluator here is
//! treated as load-bearing numerics rather than a convenience.
//!
//! Evaluation strategy:
//!
//! * arguments within [`BRANCH_CLAMP`] of the branch point `−1/e` collapse to
//!   the branch value `−1` exactly. The window absorbs floating-point noise
//!   from upstream exponentials, which otherwise lands arguments a few ulp on
//!   either side of the representable `−1/e`;
//! * arguments more than [`BRANCH_CLAMP`] below `−1/e` are a domain error;
//! * elsewhere an initial guess is chosen per region — the branch-point
//!   series in `p = √(2(e·x + 1))` near `−1/e`, `ln(1 + x)` on the middle
//!   range, and the asymptotic `ln x − ln ln x` form for large arguments —
//!   and polished with Halley iterations until the step drops below 1e-14
//!   relative, which leaves the result correct to a few ulp.

use thiserror::Error;

/// 1/e to full double precision; the branch point of W₀ sits at −1/e.
const INV_E: f64 = 0.367_879_441_171_442_321_595_523_770_161_460_867;

/// Half-width of the clamp window around the branch point −1/e.
///
/// Arguments inside the window return exactly −1; arguments below it by more
/// than the window are rejected. The truncation this introduces in w is at
/// most √(2·e·BRANCH_CLAMP) ≈ 2.4e-6 immediately at the branch point, far
/// below the accuracy any caller in this crate relies on there.
pub const BRANCH_CLAMP: f64 = 1e-12;

/// Argument below the domain of the principal branch.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("lambert w0: argument {x:e} lies below the branch point -1/e (or is not finite)")]
pub struct DomainError {
    /// The offending argument.
    pub x: f64,
}

/// Principal branch of the Lambert W function.
///
/// Errors if `x` is not finite or lies more than [`BRANCH_CLAMP`] below
/// `−1/e`. The result is always ≥ −1 and satisfies `w·eʷ = x` to a relative
/// residual of 1e-12 or better away from the branch point.
pub fn lambert_w0(x: f64) -> Result<f64, DomainError> {
    if !x.is_finite() {
        return Err(DomainError { x });
    }
    // Signed distance above the branch point.
    let z = x + INV_E;
    if z < -BRANCH_CLAMP {
        return Err(DomainError { x });
    }
    if z <= BRANCH_CLAMP {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(halley(x, initial_guess(x, z)))
}

/// Region-dependent starting point for the Halley iteration.
fn initial_guess(x: f64, z: f64) -> f64 {
    if x < -0.25 {
        // Branch-point expansion in p = sqrt(2(e·x + 1)), accurate to O(p⁶).
        let p = (2.0 * std::f64::consts::E * z).sqrt();
        branch_series(p)
    } else if x < std::f64::consts::E {
        // ln(1+x) tracks W0 to within ~0.15 over [-0.25, e); Halley's cubic
        // convergence closes the rest in two or three steps.
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

/// Series for W₀(−1/e + p²/(2e)) about the branch point.
fn branch_series(p: f64) -> f64 {
    // Coefficients of the standard expansion w = -1 + p - p²/3 + 11p³/72 - …
    let p2 = p * p;
    let p3 = p2 * p;
    let p4 = p2 * p2;
    let p5 = p4 * p;
    -1.0 + p - p2 / 3.0 + 11.0 / 72.0 * p3 - 43.0 / 540.0 * p4 + 769.0 / 17280.0 * p5
}

/// Halley iteration on f(w) = w·eʷ − x.
fn halley(x: f64, mut w: f64) -> f64 {
    // Near the branch point f'(w) = eʷ(1+w) degenerates; the series guess is
    // already accurate to O(p⁶) there, so skip iteration entirely.
    if w + 1.0 < 1e-4 {
        return w;
    }
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let next = w - f / denom;
        let converged = (w - next).abs() <= 1e-14 * (1.0 + next.abs());
        w = next;
        if converged {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: bisection on w·eʷ = x over [−1, 710].
    ///
    /// Shares no code with the evaluator under test; 200 halvings of the
    /// bracket pin the root to well below one ulp.
    fn bisect_w0(x: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0_f64, 710.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() > x {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn w0(x: f64) -> f64 {
        lambert_w0(x).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(w0(0.0), 0.0);
    }

    #[test]
    fn e_maps_to_one() {
        assert!((w0(std::f64::consts::E) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn branch_point_maps_to_minus_one_exactly() {
        assert_eq!(w0(-INV_E), -1.0);
        assert_eq!(w0(-(-1.0_f64).exp()), -1.0);
        assert_eq!(w0(-1.0 / std::f64::consts::E), -1.0);
    }

    #[test]
    fn omega_constant_matches_bisection_oracle() {
        // W0(1) is the omega constant; the literal is frozen from the oracle.
        let w = w0(1.0);
        assert!((w - 0.5671432904097838).abs() <= 1e-15);
        assert!((w - bisect_w0(1.0)).abs() <= 1e-14);
    }

    #[test]
    fn agrees_with_bisection_oracle_across_domain() {
        let xs = [
            -0.3678, -0.36, -0.3, -0.2, -0.05, -1e-4, 1e-6, 0.01, 0.5, 1.0, 2.0,
            std::f64::consts::E, 5.0, 20.0, 1e3, 1e6, 4.3e9,
        ];
        for &x in &xs {
            let w = w0(x);
            let oracle = bisect_w0(x);
            assert!(
                (w - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
                "x={x}: w={w}, oracle={oracle}"
            );
        }
    }

    #[test]
    fn round_trip_identity_over_working_range() {
        // w·eʷ for w in [-1, 20], offsets from the branch end log-spaced so
        // the ill-conditioned region near w = -1 is stressed hardest.
        let n = 10_000;
        for i in 0..n {
            let u = i as f64 / (n - 1) as f64;
            let w = -1.0 + 21.0 * (10.0_f64.powf(u) - 1.0) / 9.0;
            let x = w * w.exp();
            let back = w0(x);
            let tol = 1e-10 * w.abs().max(1.0);
            assert!(
                (back - w).abs() <= tol,
                "w={w}: back={back}, err={:e}",
                (back - w).abs()
            );
        }
    }

    #[test]
    fn residual_is_tiny_across_magnitudes() {
        for &x in &[-0.367, -0.1, 1e-9, 1.0, 10.0, 1e4, 1e12] {
            let w = w0(x);
            let residual = w * w.exp() - x;
            assert!(
                residual.abs() <= 1e-12 * x.abs().max(1e-12),
                "x={x}: residual={residual:e}"
            );
        }
    }

    #[test]
    fn below_branch_point_is_domain_error() {
        assert!(lambert_w0(-0.5).is_err());
        assert!(lambert_w0(-INV_E - 1e-9).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
        assert!(lambert_w0(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn noise_window_below_branch_point_clamps() {
        assert_eq!(w0(-INV_E - 5e-13), -1.0);
        assert_eq!(w0(-INV_E + 5e-13), -1.0);
    }

    proptest! {
        #[test]
        fn strictly_increasing(a in -0.3678..19.0f64, gap in 1e-6..3.0f64) {
            let b = a + gap;
            prop_assert!(w0(a) < w0(b));
        }

        #[test]
        fn deterministic(x in -0.3678..1e6f64) {
            prop_assert_eq!(w0(x).to_bits(), w0(x).to_bits());
        }

        #[test]
        fn round_trip_random(w in -0.999..20.0f64) {
            let x = w * w.exp();
            let back = w0(x);
            prop_assert!((back - w).abs() <= 1e-10 * w.abs().max(1.0));
        }
    }
}
