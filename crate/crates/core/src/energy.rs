//! Discrete energies of the eigenvalue problem
//!
//! ```text
//! A(v) = ∫ |∇v|^{p(x)} + a(x)/p(x) |v|^{p(x)} dx
//! B(v) = ∫ b(x)/p(x) |v|^{p(x)} dx
//! R(v) = B(v) / A(v),   J_λ(v) = A(v) - λ B(v)
//! ```
//!
//! and the weak residual, defined as the exact gradient of the discrete `J_λ`
//! with respect to interior node values. Gradient samples follow
//! [`crate::grid::GridSpec::gradient_pairs`]; zeroth-order terms use the cell
//! midpoint value. The gradient term carries no `1/p` factor, so the
//! Euler-Lagrange operator is `-div(p |∇u|^{p-2} ∇u) + a |u|^{p-2} u - λ b |u|^{p-2} u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{CoefficientFields, ExponentField};
use crate::grid::{GridSpec, ScalarField};
use crate::scalar::Scalar;

/// Floor on `|∇u|` inside `|∇u|^{p-2}` for cells with `p < 2`.
pub const GRADIENT_FLOOR: f64 = 1e-14;

/// Relative tolerance for the Dirichlet check in the energies.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec<T> {
    grid: GridSpec<T>,
    p: ExponentField<T>,
    coeffs: CoefficientFields<T>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(p: ExponentField<T>, coeffs: CoefficientFields<T>) -> Result<Self> {
        p.grid().ensure_same(coeffs.a().grid())?;
        Ok(Self { grid: p.grid().clone(), p, coeffs })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn p(&self) -> &ExponentField<T> {
        &self.p
    }

    pub fn coeffs(&self) -> &CoefficientFields<T> {
        &self.coeffs
    }

    pub fn with_coeffs(&self, coeffs: CoefficientFields<T>) -> Result<Self> {
        Self::new(self.p.clone(), coeffs)
    }

    #[inline]
    pub(crate) fn a_at(&self, cell: usize) -> T {
        self.coeffs.a().values()[cell]
    }

    #[inline]
    pub(crate) fn b_at(&self, cell: usize) -> T {
        self.coeffs.b().values()[cell]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub a: T,
    pub b: T,
    pub rayleigh: T,
    pub j_lambda: T,
    pub lambda: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual<T> {
    pub residual: ScalarField<T>,
    /// `sqrt(Σ_i r_i² / |cell|)`: the discrete L² norm of the nodal residual density.
    pub norm: T,
}

/// `|g|^{p-2}`, with the floor for `p < 2` and `0` at `g = 0` otherwise.
#[inline]
pub(crate) fn degenerate_weight<T: Scalar>(mag: T, p: T) -> T {
    let two = T::lit(2.0);
    if p < two {
        mag.max(T::lit(GRADIENT_FLOOR)).powf(p - two)
    } else if mag == T::zero() {
        T::zero()
    } else {
        mag.powf(p - two)
    }
}

#[inline]
fn abs_pow<T: Scalar>(v: T, p: T) -> T {
    let a = v.abs();
    if a == T::zero() {
        T::zero()
    } else {
        a.powf(p)
    }
}

/// Gradient sample `s` of `cell` evaluated from node values.
#[inline]
pub(crate) fn gradient_sample<T: Scalar>(grid: &GridSpec<T>, values: &[T], cell: usize, s: usize) -> [T; 2] {
    let pairs = grid.gradient_pairs(cell, s);
    let mut g = [T::zero(); 2];
    for axis in 0..grid.dimension() {
        let (from, to) = pairs[axis];
        g[axis] = (values[to] - values[from]) / grid.spacing()[axis];
    }
    g
}

#[inline]
pub(crate) fn norm2<T: Scalar>(g: &[T; 2]) -> T {
    (g[0] * g[0] + g[1] * g[1]).sqrt()
}

#[inline]
pub(crate) fn cell_mean<T: Scalar>(grid: &GridSpec<T>, values: &[T], cell: usize) -> T {
    let nodes = grid.cell_nodes(cell);
    let nodes = nodes.as_slice();
    let sum: T = nodes.iter().map(|&n| values[n]).sum();
    sum / T::from_usize_lossy(nodes.len())
}

/// `(∫|∇u|^p, ∫ a/p |u|^p, ∫ b/p |u|^p)` without any boundary check.
pub(crate) fn energy_terms<T: Scalar>(values: &[T], spec: &ProblemSpec<T>) -> (T, T, T) {
    let grid = spec.grid();
    let vol = grid.cell_volume();
    let w = grid.sample_weight();
    let (mut grad, mut mass_a, mut mass_b) = (T::zero(), T::zero(), T::zero());
    for cell in 0..grid.cell_count() {
        let p = spec.p().at(cell);
        for s in 0..grid.samples_per_cell() {
            grad = grad + w * abs_pow(norm2(&gradient_sample(grid, values, cell, s)), p);
        }
        let m = abs_pow(cell_mean(grid, values, cell), p) / p;
        mass_a = mass_a + vol * spec.a_at(cell) * m;
        mass_b = mass_b + vol * spec.b_at(cell) * m;
    }
    (grad, mass_a, mass_b)
}

fn check_field<T: Scalar>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<()> {
    u.grid().ensure_same(spec.grid())?;
    let bmax = u.max_abs_boundary();
    if bmax > T::lit(BOUNDARY_TOL) * u.max_abs().max(T::one()) {
        return Err(Error::BoundaryViolation(bmax.to_f64_lossy()));
    }
    Ok(())
}

pub fn energy_a<T: Scalar>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<T> {
    check_field(u, spec)?;
    let (g, a, _) = energy_terms(u.values(), spec);
    Ok(g + a)
}

pub fn energy_b<T: Scalar>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<T> {
    check_field(u, spec)?;
    Ok(energy_terms(u.values(), spec).2)
}

/// `R(u) = B(u) / A(u)`; the zero field is rejected.
pub fn rayleigh<T: Scalar>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<T> {
    check_field(u, spec)?;
    let (g, a, b) = energy_terms(u.values(), spec);
    let big_a = g + a;
    if big_a == T::zero() {
        return Err(Error::ZeroField);
    }
    Ok(b / big_a)
}

/// `J_λ(u) = A(u) - λ B(u)`.
pub fn functional_j<T: Scalar>(u: &ScalarField<T>, lambda: T, spec: &ProblemSpec<T>) -> Result<T> {
    check_field(u, spec)?;
    let (g, a, b) = energy_terms(u.values(), spec);
    Ok(g + a - lambda * b)
}

pub fn energy_breakdown<T: Scalar>(
    u: &ScalarField<T>,
    lambda: T,
    spec: &ProblemSpec<T>,
) -> Result<EnergyBreakdown<T>> {
    check_field(u, spec)?;
    let (g, a, b) = energy_terms(u.values(), spec);
    let big_a = g + a;
    let rayleigh = if big_a > T::zero() { b / big_a } else { T::nan() };
    Ok(EnergyBreakdown { a: big_a, b, rayleigh, j_lambda: big_a - lambda * b, lambda })
}

/// Gradient of `∫ |∇u|^p + Σ_cells vol · zeroth(cell, u_mid)` with respect to
/// every node value (boundary entries included), where `zeroth` returns the
/// derivative of the zeroth-order density at the midpoint value.
pub(crate) fn assemble_gradient<T: Scalar>(
    values: &[T],
    spec: &ProblemSpec<T>,
    zeroth: impl Fn(usize, T, T) -> T,
) -> Vec<T> {
    let grid = spec.grid();
    let vol = grid.cell_volume();
    let w = grid.sample_weight();
    let mut out = vec![T::zero(); values.len()];
    for cell in 0..grid.cell_count() {
        let p = spec.p().at(cell);
        for s in 0..grid.samples_per_cell() {
            let g = gradient_sample(grid, values, cell, s);
            let c = w * p * degenerate_weight(norm2(&g), p);
            if c == T::zero() {
                continue;
            }
            let pairs = grid.gradient_pairs(cell, s);
            for axis in 0..grid.dimension() {
                let (from, to) = pairs[axis];
                let contrib = c * g[axis] / grid.spacing()[axis];
                out[to] = out[to] + contrib;
                out[from] = out[from] - contrib;
            }
        }
        let nodes = grid.cell_nodes(cell);
        let nodes = nodes.as_slice();
        let m = cell_mean(grid, values, cell);
        let q = vol * zeroth(cell, m, p) / T::from_usize_lossy(nodes.len());
        if q != T::zero() {
            for &n in nodes {
                out[n] = out[n] + q;
            }
        }
    }
    out
}

/// `|m|^{p-2} m`
#[inline]
pub(crate) fn signed_pow<T: Scalar>(m: T, p: T) -> T {
    if m == T::zero() {
        T::zero()
    } else {
        m.signum() * m.abs().powf(p - T::one())
    }
}

/// Raw gradient of the discrete `J_λ` on all nodes, boundary entries zeroed.
pub(crate) fn residual_vector<T: Scalar>(values: &[T], lambda: T, spec: &ProblemSpec<T>) -> Vec<T> {
    let mut r = assemble_gradient(values, spec, |cell, m, p| {
        (spec.a_at(cell) - lambda * spec.b_at(cell)) * signed_pow(m, p)
    });
    for (k, v) in r.iter_mut().enumerate() {
        if spec.grid().is_boundary(k) {
            *v = T::zero();
        }
    }
    r
}

pub(crate) fn residual_norm<T: Scalar>(grid: &GridSpec<T>, r: &[T]) -> T {
    let vol = grid.cell_volume();
    let s: T = r.iter().map(|&v| v * v).sum();
    (s / vol).sqrt()
}

/// Per-interior-node partial derivatives of the discrete `J_λ` at `u`.
pub fn weak_residual<T: Scalar>(
    u: &ScalarField<T>,
    lambda: T,
    spec: &ProblemSpec<T>,
) -> Result<WeakResidual<T>> {
    check_field(u, spec)?;
    let r = residual_vector(u.values(), lambda, spec);
    let norm = residual_norm(spec.grid(), &r);
    Ok(WeakResidual { residual: u.with_values(r), norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{CellField, Expression};
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn spec_1d(n: usize, p: &str, a: f64, b: f64) -> ProblemSpec<f64> {
        let g = build_grid(1, &[(0.0f64, 1.0)], &[n]).unwrap();
        let p = crate::fields::validate_exponent(Expression::parse(p).unwrap().on_cells(&g).unwrap())
            .unwrap();
        ProblemSpec::new(p, CoefficientFields::constant(&g, a, b).unwrap()).unwrap()
    }

    fn sine(spec: &ProblemSpec<f64>) -> ScalarField<f64> {
        let mut u = Expression::parse("sin(pi*x)").unwrap().on_nodes(spec.grid()).unwrap().into_values();
        let last = u.len() - 1;
        u[0] = 0.0;
        u[last] = 0.0;
        ScalarField::new(spec.grid().clone(), u).unwrap()
    }

    #[test]
    fn zero_field() {
        let spec = spec_1d(33, "2", 0.0, 1.0);
        let u = ScalarField::zeros(spec.grid());
        assert_eq!(energy_a(&u, &spec).unwrap(), 0.0);
        assert_eq!(energy_b(&u, &spec).unwrap(), 0.0);
        assert!(matches!(rayleigh(&u, &spec), Err(Error::ZeroField)));
        let r = weak_residual(&u, 3.0, &spec).unwrap();
        assert!(r.residual.is_zero());
        assert_eq!(r.norm, 0.0);
    }

    #[test]
    fn sine_energies_p2() {
        let spec = spec_1d(2049, "2", 0.0, 1.0);
        let u = sine(&spec);
        let a = energy_a(&u, &spec).unwrap();
        let b = energy_b(&u, &spec).unwrap();
        assert!((a - PI * PI / 2.0).abs() < 1e-5, "{a}");
        assert!((b - 0.25).abs() < 1e-6, "{b}");
        assert!((rayleigh(&u, &spec).unwrap() - 1.0 / (2.0 * PI * PI)).abs() < 1e-7);
        let spec4 = spec_1d(2049, "2", 4.0, 1.0);
        assert!((energy_a(&u, &spec4).unwrap() - (PI * PI / 2.0 + 1.0)).abs() < 1e-5);
    }

    #[test]
    fn j_at_two_pi_squared() {
        let spec = spec_1d(2049, "2", 0.0, 1.0);
        let u = sine(&spec);
        assert!(functional_j(&u, 2.0 * PI * PI, &spec).unwrap().abs() < 1e-4);
        assert_eq!(functional_j(&u, 0.0, &spec).unwrap(), energy_a(&u, &spec).unwrap());
    }

    #[test]
    fn b_linear_in_b() {
        let spec = spec_1d(65, "2+x", 0.5, 1.0);
        let u = sine(&spec);
        let b1 = energy_b(&u, &spec).unwrap();
        let scaled = spec
            .with_coeffs(spec.coeffs().with_b(spec.coeffs().b().scaled(4.0)).unwrap())
            .unwrap();
        assert_eq!(energy_b(&u, &scaled).unwrap(), 4.0 * b1);
        assert_eq!(energy_a(&u, &scaled).unwrap(), energy_a(&u, &spec).unwrap());
    }

    #[test]
    fn rayleigh_homogeneity() {
        let spec = spec_1d(65, "2", 0.0, 1.0);
        let u = sine(&spec);
        let r = rayleigh(&u, &spec).unwrap();
        for t in [-3.0, 0.01, 7.5] {
            let rt = rayleigh(&u.scaled(t), &spec).unwrap();
            assert!((rt - r).abs() <= 1e-14 * r);
        }
        // variable exponent breaks it
        let spec = spec_1d(65, "2+x", 0.0, 1.0);
        let r1 = rayleigh(&u, &spec).unwrap();
        let r2 = rayleigh(&u.scaled(2.0), &spec).unwrap();
        assert!((r1 - r2).abs() > 1e-3 * r1);
    }

    #[test]
    fn boundary_violation() {
        let spec = spec_1d(9, "2", 0.0, 1.0);
        let u = ScalarField::from_fn(spec.grid(), |_| 1.0).unwrap();
        assert!(matches!(energy_a(&u, &spec), Err(Error::BoundaryViolation(_))));
    }

    #[test]
    fn mismatched_grids() {
        let g1 = build_grid(1, &[(0.0f64, 1.0)], &[9]).unwrap();
        let g2 = build_grid(1, &[(0.0f64, 1.0)], &[5]).unwrap();
        let p = ExponentField::constant(&g1, 2.0).unwrap();
        let c = CoefficientFields::new(CellField::constant(&g2, 0.0), CellField::constant(&g2, 1.0))
            .unwrap();
        assert!(ProblemSpec::new(p, c).is_err());
    }
}
