//! Variable-exponent Lebesgue/Sobolev kernel: the modular
//! `ρ(u) = ∫ |u(x)|^{p(x)} dx`, the Luxemburg norm `inf{λ > 0 : ρ(u/λ) ≤ 1}`,
//! the first-order Sobolev norm and a sampled Poincaré constant.
//!
//! Only `p⁺ < ∞` is supported, so the modular has no essential-supremum part.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ExponentField;
use crate::gradient::discrete_gradient;
use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::scalar::Scalar;

/// Relative bracket width at which the Luxemburg root search stops.
pub const LUXEMBURG_TOL: f64 = 1e-12;
/// Cap on bisection steps in the Luxemburg root search.
pub const LUXEMBURG_MAX_ITER: usize = 200;
/// Doublings allowed while bracketing; covers the full `f64` exponent range.
const BRACKET_GROWTH_CAP: usize = 2200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandKind {
    Function,
    Gradient,
}

/// Anything integrable against `|·|^{p(x)}` by midpoint quadrature: yields
/// `(cell, weight, magnitude)` per quadrature sample.
pub trait ModularIntegrand<T: Scalar> {
    fn grid(&self) -> &GridSpec<T>;
    fn kind(&self) -> IntegrandKind;
    fn for_each_sample(&self, f: &mut dyn FnMut(usize, T, T));
}

impl<T: Scalar> ModularIntegrand<T> for ScalarField<T> {
    fn grid(&self) -> &GridSpec<T> {
        ScalarField::grid(self)
    }

    fn kind(&self) -> IntegrandKind {
        IntegrandKind::Function
    }

    fn for_each_sample(&self, f: &mut dyn FnMut(usize, T, T)) {
        let w = self.grid().cell_volume();
        for cell in 0..self.grid().cell_count() {
            f(cell, w, self.cell_mean(cell).abs());
        }
    }
}

impl<T: Scalar> ModularIntegrand<T> for VectorField<T> {
    fn grid(&self) -> &GridSpec<T> {
        VectorField::grid(self)
    }

    fn kind(&self) -> IntegrandKind {
        IntegrandKind::Gradient
    }

    fn for_each_sample(&self, f: &mut dyn FnMut(usize, T, T)) {
        let w = self.grid().sample_weight();
        for cell in 0..self.grid().cell_count() {
            for s in 0..self.grid().samples_per_cell() {
                f(cell, w, self.magnitude(cell, s));
            }
        }
    }
}

/// A single partial derivative `∂u/∂x_axis`, viewed as a scalar integrand.
#[derive(Debug, Clone, Copy)]
pub struct AxisComponent<'a, T> {
    pub field: &'a VectorField<T>,
    pub axis: usize,
}

impl<T: Scalar> ModularIntegrand<T> for AxisComponent<'_, T> {
    fn grid(&self) -> &GridSpec<T> {
        self.field.grid()
    }

    fn kind(&self) -> IntegrandKind {
        IntegrandKind::Gradient
    }

    fn for_each_sample(&self, f: &mut dyn FnMut(usize, T, T)) {
        let grid = self.field.grid();
        let w = grid.sample_weight();
        for cell in 0..grid.cell_count() {
            for s in 0..grid.samples_per_cell() {
                f(cell, w, self.field.sample(cell, s)[self.axis].abs());
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularValue<T> {
    pub value: T,
    pub kind: IntegrandKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuxemburgNorm<T> {
    pub value: T,
    /// Final `(lo, hi)` bracket of the root search.
    pub bracket: (T, T),
    pub iterations: usize,
}

fn scaled_modular<T: Scalar, U: ModularIntegrand<T> + ?Sized>(
    u: &U,
    p: &ExponentField<T>,
    inv_scale: T,
) -> T {
    let mut acc = T::zero();
    u.for_each_sample(&mut |cell, w, m| {
        let v = m * inv_scale;
        if v > T::zero() {
            acc = acc + w * v.powf(p.at(cell));
        }
    });
    acc
}

pub fn modular<T: Scalar, U: ModularIntegrand<T> + ?Sized>(
    u: &U,
    p: &ExponentField<T>,
) -> Result<ModularValue<T>> {
    u.grid().ensure_same(p.grid())?;
    Ok(ModularValue { value: scaled_modular(u, p, T::one()), kind: u.kind() })
}

fn is_zero_integrand<T: Scalar, U: ModularIntegrand<T> + ?Sized>(u: &U) -> bool {
    let mut zero = true;
    u.for_each_sample(&mut |_, _, m| zero &= m == T::zero());
    zero
}

pub fn luxemburg_norm<T: Scalar, U: ModularIntegrand<T> + ?Sized>(
    u: &U,
    p: &ExponentField<T>,
) -> Result<LuxemburgNorm<T>> {
    luxemburg_norm_with(u, p, T::lit(LUXEMBURG_TOL), LUXEMBURG_MAX_ITER)
}

/// Bisection on `λ ↦ ρ(u/λ) - 1`, which is strictly decreasing for nonzero `u`.
/// The bracket is grown geometrically from 1 and the search stops once its
/// width drops below `tol · hi`.
pub fn luxemburg_norm_with<T: Scalar, U: ModularIntegrand<T> + ?Sized>(
    u: &U,
    p: &ExponentField<T>,
    tol: T,
    max_iter: usize,
) -> Result<LuxemburgNorm<T>> {
    u.grid().ensure_same(p.grid())?;
    if is_zero_integrand(u) {
        return Ok(LuxemburgNorm { value: T::zero(), bracket: (T::zero(), T::zero()), iterations: 0 });
    }
    let rho = |lambda: T| scaled_modular(u, p, T::one() / lambda);
    let two = T::lit(2.0);
    let (mut lo, mut hi) = (T::one(), T::one());
    let mut steps = 0usize;
    if rho(T::one()) > T::one() {
        while rho(hi) > T::one() {
            lo = hi;
            hi = hi * two;
            steps += 1;
            if steps > BRACKET_GROWTH_CAP || !hi.is_finite() {
                return Err(Error::NoConvergence(steps));
            }
        }
    } else {
        while rho(lo) <= T::one() {
            hi = lo;
            lo = lo / two;
            steps += 1;
            if steps > BRACKET_GROWTH_CAP || lo == T::zero() {
                return Err(Error::NoConvergence(steps));
            }
        }
    }
    let mut iterations = 0;
    while hi - lo > tol * hi {
        if iterations == max_iter {
            return Err(Error::NoConvergence(iterations));
        }
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if rho(mid) > T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(LuxemburgNorm { value: (lo + hi) / two, bracket: (lo, hi), iterations })
}

/// `‖u‖_{p(·)} + Σ_i ‖∂u/∂x_i‖_{p(·)}`.
pub fn sobolev_norm<T: Scalar>(u: &ScalarField<T>, p: &ExponentField<T>) -> Result<T> {
    let mut total = luxemburg_norm(u, p)?.value;
    let grad = discrete_gradient(u);
    for axis in 0..u.grid().dimension() {
        total = total + luxemburg_norm(&AxisComponent { field: &grad, axis }, p)?.value;
    }
    Ok(total)
}

/// `∫|u|^{p(x)} / ∫|∇u|^{p(x)}`, or `None` when the gradient modular vanishes.
pub fn poincare_ratio<T: Scalar>(u: &ScalarField<T>, p: &ExponentField<T>) -> Result<Option<T>> {
    let num = modular(u, p)?.value;
    let den = modular(&discrete_gradient(u), p)?.value;
    Ok((den > T::zero()).then(|| num / den))
}

/// Trial fields for the Poincaré estimate: the fundamental product of sines
/// first, then random smooth sine combinations with random amplitude, all
/// vanishing on the boundary.
pub fn poincare_samples<T: Scalar>(
    grid: &GridSpec<T>,
    sample_count: usize,
    seed: u64,
) -> Vec<ScalarField<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    let ext: Vec<(f64, f64)> =
        grid.extents().iter().map(|&(lo, hi)| (lo.to_f64_lossy(), hi.to_f64_lossy())).collect();
    let dim = grid.dimension();
    let mode = move |c: [T; 2], k: [usize; 2]| -> f64 {
        let mut v = 1.0;
        for axis in 0..dim {
            let (lo, hi) = ext[axis];
            let xi = (c[axis].to_f64_lossy() - lo) / (hi - lo);
            v *= (k[axis] as f64 * pi * xi).sin();
        }
        v
    };
    let mut out = Vec::with_capacity(sample_count);
    for n in 0..sample_count {
        let mut terms: Vec<([usize; 2], f64)> = Vec::new();
        let amplitude;
        if n == 0 {
            terms.push(([1, 1], 1.0));
            amplitude = 1.0;
        } else {
            let max_mode = 4usize;
            for k1 in 1..=max_mode {
                for k2 in 1..=(if dim == 2 { max_mode } else { 1 }) {
                    let decay = ((k1 * k2) as f64).powi(2);
                    terms.push(([k1, k2], rng.gen_range(-1.0..1.0) / decay));
                }
            }
            // bias toward the fundamental mode so most samples are single-signed bumps
            terms[0].1 += rng.gen_range(0.5..1.5);
            amplitude = 2f64.powf(rng.gen_range(-2.0..2.0));
        }
        let f = ScalarField::from_fn(grid, |c| {
            let v: f64 = terms.iter().map(|&(k, a)| a * mode(c, k)).sum();
            T::lit(amplitude * v)
        })
        .expect("finite trial field");
        let mut values = f.into_values();
        for (k, v) in values.iter_mut().enumerate() {
            if grid.is_boundary(k) {
                *v = T::zero();
            }
        }
        out.push(ScalarField::new(grid.clone(), values).expect("finite trial field"));
    }
    out
}

/// Largest sampled ratio `∫|u|^{p(x)} / ∫|∇u|^{p(x)}` over the built-in trial
/// family plus `extra` fields (e.g. a computed eigenfunction). This is a lower
/// bound on the best Poincaré constant of the discrete space.
pub fn poincare_constant_estimate<T: Scalar>(
    grid: &GridSpec<T>,
    p: &ExponentField<T>,
    sample_count: usize,
    seed: u64,
    extra: &[ScalarField<T>],
) -> Result<T> {
    if sample_count == 0 {
        return Err(Error::InvalidParameter("sample_count must be >= 1".into()));
    }
    let mut best: Option<T> = None;
    for u in poincare_samples(grid, sample_count, seed).iter().chain(extra) {
        if let Some(r) = poincare_ratio(u, p)? {
            best = Some(best.map_or(r, |b: T| b.max(r)));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("every trial field has zero gradient".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{CellField, Expression};
    use crate::grid::build_grid;

    fn unit(n: usize) -> GridSpec<f64> {
        build_grid(1, &[(0.0f64, 1.0)], &[n]).unwrap()
    }

    #[test]
    fn zero_field() {
        let g = unit(9);
        let p = ExponentField::constant(&g, 3.0).unwrap();
        let u = ScalarField::zeros(&g);
        assert_eq!(modular(&u, &p).unwrap().value, 0.0);
        assert_eq!(luxemburg_norm(&u, &p).unwrap().value, 0.0);
        assert_eq!(sobolev_norm(&u, &p).unwrap(), 0.0);
    }

    #[test]
    fn constant_exponent_closed_forms() {
        let g = unit(9);
        let p = ExponentField::constant(&g, 3.0).unwrap();
        let u = ScalarField::from_fn(&g, |_| 2.0).unwrap();
        assert!((modular(&u, &p).unwrap().value - 8.0).abs() < 1e-13);
        let n = luxemburg_norm(&u, &p).unwrap();
        assert!((n.value - 2.0).abs() < 1e-11);
        assert!(n.bracket.0 <= 2.0 && 2.0 <= n.bracket.1);
    }

    #[test]
    fn piecewise_exponent_norm() {
        // ½ s + ½ s² = 1 with s = (2/λ)² has root s = 1, so λ = 2
        let g = unit(9);
        let p = crate::fields::validate_exponent(
            Expression::parse("2 + 2*step(x-0.5)").unwrap().on_cells(&g).unwrap(),
        )
        .unwrap();
        let u = ScalarField::from_fn(&g, |_| 2.0).unwrap();
        assert!((luxemburg_norm(&u, &p).unwrap().value - 2.0).abs() < 1e-11);
    }

    #[test]
    fn grid_mismatch() {
        let p = ExponentField::constant(&unit(9), 2.0).unwrap();
        let u = ScalarField::zeros(&unit(5));
        assert!(matches!(modular(&u, &p), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn tiny_and_huge_norms() {
        let g = unit(9);
        let p = ExponentField::constant(&g, 2.0).unwrap();
        for scale in [1e-200, 1e-8, 1e8, 1e150] {
            let u = ScalarField::from_fn(&g, |_| scale).unwrap();
            let n = luxemburg_norm(&u, &p).unwrap().value;
            assert!((n / scale - 1.0).abs() < 1e-11, "{scale}: {n}");
        }
    }

    #[test]
    fn sobolev_norm_affine() {
        let g = unit(1025);
        let p = ExponentField::constant(&g, 2.0).unwrap();
        let u = ScalarField::from_fn(&g, |c| c[0]).unwrap();
        let expected = 1.0 / 3f64.sqrt() + 1.0;
        assert!((sobolev_norm(&u, &p).unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn poincare_sine_product_square() {
        let g = build_grid(2, &[(0.0f64, 1.0), (0.0, 1.0)], &[129, 129]).unwrap();
        let p = ExponentField::constant(&g, 2.0).unwrap();
        let c = poincare_constant_estimate(&g, &p, 1, 0, &[]).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI.powi(2));
        assert!((c - expected).abs() / expected < 1e-3, "{c} vs {expected}");
    }

    #[test]
    fn poincare_interval_lower_bound() {
        let g = unit(257);
        let p = ExponentField::constant(&g, 2.0).unwrap();
        let c = poincare_constant_estimate(&g, &p, 20, 7, &[]).unwrap();
        let bound = 1.0 / std::f64::consts::PI.powi(2);
        assert!(c <= bound * (1.0 + 1e-9) && c > bound * (1.0 - 1e-4), "{c}");
        let ratios: Vec<f64> = poincare_samples(&g, 20, 7)
            .iter()
            .filter_map(|u| poincare_ratio(u, &p).unwrap())
            .collect();
        assert!(ratios.iter().all(|&r| r <= c));
    }

    #[test]
    fn poincare_needs_samples() {
        let g = unit(9);
        let p = ExponentField::constant(&g, 2.0).unwrap();
        assert!(poincare_constant_estimate(&g, &p, 0, 0, &[]).is_err());
    }

    #[test]
    fn f32_modular() {
        let g = build_grid(1, &[(0.0f32, 1.0)], &[9]).unwrap();
        let p = ExponentField::constant(&g, 3.0f32).unwrap();
        let u = ScalarField::from_fn(&g, |_| 2.0f32).unwrap();
        assert!((modular(&u, &p).unwrap().value - 8.0).abs() < 1e-5);
        let n = luxemburg_norm_with(&u, &p, 1e-6, 100).unwrap();
        assert!((n.value - 2.0).abs() < 1e-5);
        let _ = CellField::constant(&g, 1.0f32);
    }
}
