//! Reference value of `λ₁` for constant `p` on an interval, by shooting.
//!
//! With `φ = |u'|^{p-2} u'` the equation `-(p |u'|^{p-2} u')' = λ |u|^{p-2} u`
//! becomes
//!
//! ```text
//! u' = sign(φ) |φ|^{1/(p-1)},   φ' = -(λ/p) |u|^{p-2} u,   u(0) = 0, φ(0) = 1.
//! ```
//!
//! The first eigenfunction is symmetric, so `λ₁` is the root of `φ(L/2; λ)`.
//! `φ(L/2; λ)` decreases in `λ` and is bracketed by doubling before bisection.

use crate::error::{Error, Result};

/// Start of integration, relative to `L`; the series `u ≈ x` is used below it.
const START: f64 = 1e-12;
/// Number of uniform steps on `[0, L/2]` once the graded start is past.
const STEPS: usize = 20_000;
/// Graded steps near the origin: `h ≤ GRADE · x`.
const GRADE: f64 = 0.05;

fn rhs(p: f64, lambda: f64, u: f64, phi: f64) -> (f64, f64) {
    let du = phi.signum() * phi.abs().powf(1.0 / (p - 1.0));
    let dphi = if u == 0.0 { 0.0 } else { -(lambda / p) * u.signum() * u.abs().powf(p - 1.0) };
    (du, dphi)
}

/// `φ(L/2)` for a given `λ` by RK4.
fn shoot(p: f64, length: f64, lambda: f64) -> f64 {
    let half = length / 2.0;
    let big_h = half / STEPS as f64;
    let mut x = START * length;
    let mut u = x;
    let mut phi = 1.0 - (lambda / p) * x.powf(p) / p;
    while x < half {
        let h = (GRADE * x).min(big_h).min(half - x);
        let (k1u, k1p) = rhs(p, lambda, u, phi);
        let (k2u, k2p) = rhs(p, lambda, u + 0.5 * h * k1u, phi + 0.5 * h * k1p);
        let (k3u, k3p) = rhs(p, lambda, u + 0.5 * h * k2u, phi + 0.5 * h * k2p);
        let (k4u, k4p) = rhs(p, lambda, u + h * k3u, phi + h * k3p);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        phi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        x += h;
    }
    phi
}

/// `π_p = 2π / (p sin(π/p))`.
pub fn pi_p(p: f64) -> f64 {
    2.0 * std::f64::consts::PI / (p * (std::f64::consts::PI / p).sin())
}

/// Closed form `p (p-1) (π_p / L)^p` of the first eigenvalue on `(0, L)`.
pub fn constant_p_closed_form(p: f64, length: f64) -> Result<f64> {
    check(p, length)?;
    Ok(p * (p - 1.0) * (pi_p(p) / length).powf(p))
}

fn check(p: f64, length: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("oracle needs p > 1, got {p}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidParameter(format!("oracle needs a positive length, got {length}")));
    }
    Ok(())
}

/// First eigenvalue of the interval problem with `a = 0`, `b = 1` and constant `p`.
pub fn constant_p_oracle(p: f64, length: f64) -> Result<f64> {
    check(p, length)?;
    let mut lo = 1e-3 / length.powf(p);
    let mut hi = 1.0 / length.powf(p);
    let mut guard = 0;
    while shoot(p, length, lo) <= 0.0 {
        lo /= 4.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::ShootingBracket(format!("no lower bracket for p = {p}")));
        }
    }
    guard = 0;
    while shoot(p, length, hi) > 0.0 {
        lo = lo.max(hi);
        hi *= 4.0;
        guard += 1;
        if guard > 200 || !hi.is_finite() {
            return Err(Error::ShootingBracket(format!("no upper bracket for p = {p}")));
        }
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shoot(p, length, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn p2_unit_interval() {
        let l = constant_p_oracle(2.0, 1.0).unwrap();
        assert!((l - 2.0 * PI * PI).abs() < 1e-8 * l, "{l}");
    }

    #[test]
    fn p2_length_two() {
        let l = constant_p_oracle(2.0, 2.0).unwrap();
        assert!((l - PI * PI / 2.0).abs() < 1e-8 * l, "{l}");
    }

    #[test]
    fn agrees_with_closed_form() {
        for &p in &[1.5, 3.0, 4.0] {
            let shot = constant_p_oracle(p, 1.0).unwrap();
            let exact = constant_p_closed_form(p, 1.0).unwrap();
            assert!((shot - exact).abs() < 1e-8 * exact, "p = {p}: {shot} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(constant_p_oracle(1.0, 1.0).is_err());
        assert!(constant_p_oracle(2.0, 0.0).is_err());
    }
}
