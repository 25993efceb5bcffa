//! One-dimensional search for the best amplitude `t` in `R(t·v)`.
//!
//! For a variable exponent `R(t·v)` depends on `t`. The search runs a golden
//! section on `s = ln t` and then polishes the stationary point by bisection on
//! the sign of `dR(e^s v)/ds = (A ⟨∇B, w⟩ - B ⟨∇A, w⟩) / A²`, which is computed
//! without differencing.

use crate::energy::{cell_mean, gradient_sample, norm2, ProblemSpec};
use crate::scalar::Scalar;

const GOLDEN_WIDTH: f64 = 1e-3;
const POLISH_WIDTH: f64 = 1e-14;

/// `(A, B, ⟨∇A(w), w⟩, ⟨∇B(w), w⟩)` for `w = t·v`.
fn radial_terms<T: Scalar>(values: &[T], t: T, spec: &ProblemSpec<T>) -> (T, T, T, T) {
    let grid = spec.grid();
    let vol = grid.cell_volume();
    let w = grid.sample_weight();
    let (mut a, mut b, mut da, mut db) = (T::zero(), T::zero(), T::zero(), T::zero());
    for cell in 0..grid.cell_count() {
        let p = spec.p().at(cell);
        for s in 0..grid.samples_per_cell() {
            let g = norm2(&gradient_sample(grid, values, cell, s)) * t;
            if g > T::zero() {
                let gp = w * g.powf(p);
                a = a + gp;
                da = da + p * gp;
            }
        }
        let m = (cell_mean(grid, values, cell) * t).abs();
        if m > T::zero() {
            let mp = vol * m.powf(p);
            a = a + spec.a_at(cell) / p * mp;
            da = da + spec.a_at(cell) * mp;
            b = b + spec.b_at(cell) / p * mp;
            db = db + spec.b_at(cell) * mp;
        }
    }
    (a, b, da, db)
}

fn rayleigh_at<T: Scalar>(values: &[T], s: T, spec: &ProblemSpec<T>) -> T {
    let (a, b, _, _) = radial_terms(values, s.exp(), spec);
    if a > T::zero() {
        b / a
    } else {
        T::neg_infinity()
    }
}

/// Sign-carrying derivative `A ⟨∇B, w⟩ - B ⟨∇A, w⟩` of `s ↦ R(e^s v)` (up to `A²`).
fn slope_at<T: Scalar>(values: &[T], s: T, spec: &ProblemSpec<T>) -> T {
    let (a, b, da, db) = radial_terms(values, s.exp(), spec);
    a * db - b * da
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AmplitudeChoice<T> {
    pub t: T,
    pub at_bound: bool,
}

/// Maximize `t ↦ R(t·v)` over `[t_min, t_max]`.
pub(crate) fn best_amplitude<T: Scalar>(
    values: &[T],
    spec: &ProblemSpec<T>,
    t_min: T,
    t_max: T,
) -> AmplitudeChoice<T> {
    let (lo0, hi0) = (t_min.ln(), t_max.ln());
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo0, hi0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = rayleigh_at(values, c, spec);
    let mut fd = rayleigh_at(values, d, spec);
    while b - a > T::lit(GOLDEN_WIDTH) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rayleigh_at(values, c, spec);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rayleigh_at(values, d, spec);
        }
    }
    let edge = T::lit(2.0 * GOLDEN_WIDTH);
    if a - lo0 <= edge && slope_at(values, lo0, spec) <= T::zero() {
        return AmplitudeChoice { t: t_min, at_bound: true };
    }
    if hi0 - b <= edge && slope_at(values, hi0, spec) >= T::zero() {
        return AmplitudeChoice { t: t_max, at_bound: true };
    }
    let (mut lo, mut hi) = (a.max(lo0), b.min(hi0));
    if !(slope_at(values, lo, spec) > T::zero() && slope_at(values, hi, spec) < T::zero()) {
        return AmplitudeChoice { t: ((a + b) / T::lit(2.0)).exp(), at_bound: false };
    }
    while hi - lo > T::lit(POLISH_WIDTH) {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope_at(values, mid, spec) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    AmplitudeChoice { t: ((lo + hi) / T::lit(2.0)).exp(), at_bound: false }
}
