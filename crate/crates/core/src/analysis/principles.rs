use serde::{Deserialize, Serialize};

use super::PrincipleVerdict;
use crate::energy::{assemble_gradient, energy_b, energy_terms, functional_j, residual_norm, signed_pow, ProblemSpec};
use crate::error::{Error, Result};
use crate::expr::CellField;
use crate::grid::{GridSpec, ScalarField};
use crate::scalar::Scalar;
use crate::solver::linalg::InteriorMap;
use crate::solver::precond::curvature_matrix;
use crate::solver::EigenResult;

/// Nondecreasing zeroth-order term `F(x, u)` of `-Δ_{p(x)} u + F(x, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotoneMap {
    Zero,
    /// `F(u) = slope · u`
    Linear { slope: f64 },
    /// `F(x, u) = coefficient · |u|^{p(x)-2} u`
    MatchedPower { coefficient: f64 },
}

impl MonotoneMap {
    fn declared_monotone(&self) -> bool {
        match *self {
            MonotoneMap::Zero => true,
            MonotoneMap::Linear { slope } => slope >= 0.0,
            MonotoneMap::MatchedPower { coefficient } => coefficient >= 0.0,
        }
    }

    fn value<T: Scalar>(&self, m: T, p: T) -> T {
        match *self {
            MonotoneMap::Zero => T::zero(),
            MonotoneMap::Linear { slope } => T::lit(slope) * m,
            MonotoneMap::MatchedPower { coefficient } => T::lit(coefficient) * signed_pow(m, p),
        }
    }

    /// Primitive `Φ` with `Φ(0) = 0`.
    fn primitive<T: Scalar>(&self, m: T, p: T) -> T {
        match *self {
            MonotoneMap::Zero => T::zero(),
            MonotoneMap::Linear { slope } => T::lit(slope) * m * m / T::lit(2.0),
            MonotoneMap::MatchedPower { coefficient } => {
                let a = m.abs();
                if a == T::zero() {
                    T::zero()
                } else {
                    T::lit(coefficient) * a.powf(p) / p
                }
            }
        }
    }

    /// `∂F/∂u` at `|u| = m > 0`.
    fn slope<T: Scalar>(&self, m: T, p: T) -> T {
        match *self {
            MonotoneMap::Zero => T::zero(),
            MonotoneMap::Linear { slope } => T::lit(slope),
            MonotoneMap::MatchedPower { coefficient } => {
                T::lit(coefficient) * (p - T::one()) * m.powf(p - T::lit(2.0))
            }
        }
    }
}

/// Nodal weak form of `-Δ_{p(x)} u + F(x, u)` tested with hat functions.
fn operator<T: Scalar>(values: &[T], map: &MonotoneMap, spec: &ProblemSpec<T>) -> Vec<T> {
    assemble_gradient(values, spec, |cell, m, _| map.value(m, spec.p().at(cell)))
}

/// Nodal load `∫ f φ_i` with the midpoint rule.
fn load<T: Scalar>(grid: &GridSpec<T>, f: &CellField<T>) -> Vec<T> {
    let vol = grid.cell_volume();
    let mut out = vec![T::zero(); grid.node_count()];
    for cell in 0..grid.cell_count() {
        let nodes = grid.cell_nodes(cell);
        let nodes = nodes.as_slice();
        let share = vol * f.values()[cell] / T::from_usize_lossy(nodes.len());
        for &n in nodes {
            out[n] = out[n] + share;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSolve<T> {
    pub solution: ScalarField<T>,
    pub residual_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Solve `-Δ_{p(x)} u + F(x, u) = f`, `u = 0` on the boundary, by damped
/// preconditioned descent on the convex energy `∫ |∇u|^p + Φ(x, u) - f u`.
pub fn solve_monotone_problem<T: Scalar>(
    spec: &ProblemSpec<T>,
    map: &MonotoneMap,
    f: &CellField<T>,
    tolerance: T,
    max_iterations: usize,
) -> Result<MonotoneSolve<T>> {
    if !map.declared_monotone() {
        return Err(Error::InvalidParameter(format!("{map:?} is not nondecreasing")));
    }
    let grid = spec.grid();
    grid.ensure_same(f.grid())?;
    let unknowns = InteriorMap::new(grid);
    let rhs = load(grid, f);
    let vol = grid.cell_volume();
    let energy = |v: &[T]| -> T {
        let mut e = energy_terms(v, spec).0;
        for cell in 0..grid.cell_count() {
            let m = crate::energy::cell_mean(grid, v, cell);
            e = e + vol * (map.primitive(m, spec.p().at(cell)) - f.values()[cell] * m);
        }
        e
    };
    let gradient = |v: &[T]| -> Vec<T> {
        let mut g = operator(v, map, spec);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = if grid.is_boundary(k) { T::zero() } else { *gk - rhs[k] };
        }
        g
    };

    let mut v = vec![T::zero(); grid.node_count()];
    let mut e = energy(&v);
    let mut g = gradient(&v);
    let mut res = residual_norm(grid, &g);
    let mut iterations = 0;
    while res > tolerance && iterations < max_iterations {
        let factor = curvature_matrix(&v, spec, &unknowns, |_, m, p| map.slope(m, p))?;
        let z = factor.solve(&unknowns.gather(&g));
        let slope: T = unknowns.gather(&g).iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = v.clone();
            unknowns.scatter_add(&mut trial, &z, -alpha);
            let et = energy(&trial);
            let gt = gradient(&trial);
            let rt = residual_norm(grid, &gt);
            let rounding = (et - e).abs() <= T::lit(64.0) * T::epsilon() * e.abs().max(T::one());
            if et <= e - T::lit(1e-4) * alpha * slope || (rounding && rt < res) {
                v = trial;
                e = et;
                g = gt;
                res = rt;
                accepted = true;
                break;
            }
            alpha = alpha / T::lit(2.0);
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }
    Ok(MonotoneSolve {
        solution: ScalarField::new(grid.clone(), v)?,
        residual_norm: res,
        iterations,
        converged: res <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ComparisonOutcome<T> {
    Verdict(PrincipleVerdict<T>),
    /// A precondition failed; this is not a violation of the principle.
    Inapplicable { reason: String },
}

/// Comparison principle: if `L(u1) ≤ L(u2)` weakly (node-wise within
/// `tolerance`) and `u1 ≤ u2` on the boundary, then `u1 ≤ u2` inside.
pub fn comparison_check<T: Scalar>(
    u1: &ScalarField<T>,
    u2: &ScalarField<T>,
    map: &MonotoneMap,
    spec: &ProblemSpec<T>,
    tolerance: T,
) -> Result<ComparisonOutcome<T>> {
    u1.grid().ensure_same(spec.grid())?;
    u2.grid().ensure_same(spec.grid())?;
    let grid = spec.grid();
    let inapplicable = |reason: String| Ok(ComparisonOutcome::Inapplicable { reason });
    if !map.declared_monotone() {
        return inapplicable(format!("{map:?} is not nondecreasing"));
    }
    // spot check monotonicity on the sampled values
    for cell in 0..grid.cell_count() {
        let p = spec.p().at(cell);
        let (m1, m2) = (u1.cell_mean(cell), u2.cell_mean(cell));
        let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
        if map.value(lo, p) > map.value(hi, p) {
            return inapplicable(format!("F decreases on cell {cell}"));
        }
    }
    for k in 0..grid.node_count() {
        if grid.is_boundary(k) && u1.values()[k] > u2.values()[k] + tolerance {
            return inapplicable(format!("boundary data not ordered at node {k}"));
        }
    }
    let l1 = operator(u1.values(), map, spec);
    let l2 = operator(u2.values(), map, spec);
    for k in grid.interior_nodes() {
        if l1[k] > l2[k] + tolerance {
            return inapplicable(format!("operator values not ordered at node {k}"));
        }
    }
    let mut worst = T::infinity();
    let mut at = 0;
    for k in grid.interior_nodes() {
        let d = u2.values()[k] - u1.values()[k];
        if d < worst {
            worst = d;
            at = k;
        }
    }
    if grid.interior_nodes().is_empty() {
        worst = T::zero();
    }
    Ok(ComparisonOutcome::Verdict(PrincipleVerdict {
        holds: worst >= -tolerance,
        worst_violation: (-worst).max(T::zero()),
        location: grid.node_coords(at)[..grid.dimension()].to_vec(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDerivative<T> {
    pub location: Vec<T>,
    pub outer_derivative: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfProfile<T> {
    pub verdict: PrincipleVerdict<T>,
    pub margin: T,
    pub derivatives: Vec<BoundaryDerivative<T>>,
}

/// Outer normal derivative at every boundary node (2D corners excluded) from
/// the one-sided second-order difference `(-3u₀ + 4u₁ - u₂) / 2h` along the
/// inward normal. Holds when every outer derivative is below `-margin`
/// (default margin: the smallest spacing).
pub fn hopf_boundary_check<T: Scalar>(u: &ScalarField<T>, margin: Option<T>) -> Result<HopfProfile<T>> {
    let grid = u.grid();
    let margin = margin.unwrap_or_else(|| grid.min_spacing());
    let (nx, ny) = grid.nx_ny();
    if nx < 3 || (grid.dimension() == 2 && ny < 3) {
        return Err(Error::InvalidGrid("normal differences need 3 nodes per axis".into()));
    }
    let v = u.values();
    let mut derivatives = Vec::new();
    for k in 0..grid.node_count() {
        if !grid.is_boundary(k) {
            continue;
        }
        let (i, j) = grid.node_ij(k);
        // (axis, step direction into the domain)
        let mut normals: Vec<(usize, isize)> = Vec::new();
        if i == 0 {
            normals.push((0, 1));
        }
        if i == nx - 1 {
            normals.push((0, -1));
        }
        if grid.dimension() == 2 {
            if j == 0 {
                normals.push((1, 1));
            }
            if j == ny - 1 {
                normals.push((1, -1));
            }
        }
        if normals.len() != 1 {
            continue;
        }
        let (axis, dir) = normals[0];
        let step = |m: isize| -> usize {
            let (ii, jj) = if axis == 0 { (i as isize + dir * m, j as isize) } else { (i as isize, j as isize + dir * m) };
            grid.node_index(ii as usize, jj as usize)
        };
        let h = grid.spacing()[axis];
        let inward = (T::lit(-3.0) * v[step(0)] + T::lit(4.0) * v[step(1)] - v[step(2)]) / (T::lit(2.0) * h);
        derivatives.push(BoundaryDerivative {
            location: grid.node_coords(k)[..grid.dimension()].to_vec(),
            outer_derivative: -inward,
        });
    }
    let worst = derivatives
        .iter()
        .fold(None::<&BoundaryDerivative<T>>, |acc, d| match acc {
            Some(a) if a.outer_derivative >= d.outer_derivative => Some(a),
            _ => Some(d),
        })
        .expect("every grid has boundary nodes");
    let excess = worst.outer_derivative + margin;
    Ok(HopfProfile {
        verdict: PrincipleVerdict {
            holds: excess < T::zero(),
            worst_violation: excess.max(T::zero()),
            location: worst.location.clone(),
        },
        margin,
        derivatives,
    })
}

/// `|⟨u₁, u₂⟩| / (‖u₁‖ ‖u₂‖)` over interior nodes.
pub fn collinearity<T: Scalar>(u1: &ScalarField<T>, u2: &ScalarField<T>) -> Result<T> {
    u1.grid().ensure_same(u2.grid())?;
    let grid = u1.grid();
    let (mut dot, mut n1, mut n2) = (T::zero(), T::zero(), T::zero());
    for k in grid.interior_nodes() {
        let (a, b) = (u1.values()[k], u2.values()[k]);
        dot = dot + a * b;
        n1 = n1 + a * a;
        n2 = n2 + b * b;
    }
    if n1 == T::zero() || n2 == T::zero() {
        return Err(Error::ZeroField);
    }
    Ok((dot.abs() / (n1.sqrt() * n2.sqrt())).min(T::one()))
}

/// Collinearity of two converged eigenfunctions.
pub fn simplicity_check<T: Scalar>(r1: &EigenResult<T>, r2: &EigenResult<T>, tolerance: T) -> Result<T> {
    for r in [r1, r2] {
        if r.residual_norm > tolerance {
            return Err(Error::InvalidParameter(format!(
                "residual {} above tolerance {tolerance}",
                r.residual_norm
            )));
        }
    }
    collinearity(&r1.eigenfunction, &r2.eigenfunction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceOutcome<T> {
    pub lambda: T,
    pub lambda1: T,
    /// `J_λ(u₁)`
    pub j: T,
    /// `(λ₁ - λ) B(u₁)`
    pub identity: T,
    pub relative_gap: T,
    /// `J_λ(u₁)` has the sign of `λ₁ - λ` (strictly negative for `λ > λ₁`).
    pub verdict: bool,
}

pub fn nonexistence_check<T: Scalar>(r: &EigenResult<T>, lambda: T, spec: &ProblemSpec<T>) -> Result<NonexistenceOutcome<T>> {
    let u = &r.eigenfunction;
    let j = functional_j(u, lambda, spec)?;
    let b = energy_b(u, spec)?;
    let identity = (r.lambda1 - lambda) * b;
    let scale = identity.abs().max(T::min_positive_value());
    let relative_gap = (j - identity).abs() / scale;
    let verdict = if lambda > r.lambda1 {
        j < T::zero()
    } else if lambda < r.lambda1 {
        j > T::zero()
    } else {
        true
    };
    Ok(NonexistenceOutcome { lambda, lambda1: r.lambda1, j, identity, relative_gap, verdict })
}
