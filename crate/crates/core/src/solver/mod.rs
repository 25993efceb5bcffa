//! First eigenpair by constrained ascent on the Rayleigh quotient.
//!
//! Each iteration takes `d = -P⁻¹ F`, where `F` is the weak residual at
//! `λ = A/B` and `P` is a positive definite curvature model of `A`. For `p ≡ 2`
//! this is inverse iteration. Steps are backtracked on `R`, then the amplitude
//! is re-optimized (variable `p`) or normalized to `sup|v| = 1` (constant `p`).
//! The final eigenfunction is `|v|`.

mod amplitude;
pub(crate) mod linalg;
pub mod oracle;
pub(crate) mod precond;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_terms, residual_norm, residual_vector, ProblemSpec};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::scalar::Scalar;

use amplitude::best_amplitude;
use linalg::InteriorMap;
use precond::curvature_matrix;

pub use oracle::{constant_p_closed_form, constant_p_oracle};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const ROUNDING_FACTOR: f64 = 64.0;
const NOISE_AMPLITUDE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Armijo backtracking on `R` starting from a unit step.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub step_rule: StepRule,
    /// `[t_min, t_max]` for the amplitude search.
    pub amplitude_bracket: (f64, f64),
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-8,
            step_rule: StepRule::Backtracking,
            amplitude_bracket: (1e-3, 1e3),
            restarts: 3,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.amplitude_bracket;
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if !(lo > 0.0 && lo < 1.0 && hi > 1.0 && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude bracket must satisfy 0 < t_min < 1 < t_max, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// No step along the preconditioned direction increased `R`.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<T> {
    pub iteration: usize,
    pub rayleigh: T,
    pub residual: T,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveFlags {
    /// The final amplitude search ended on an end of the bracket.
    pub amplitude_at_bound: bool,
    /// Set by [`refine_eigenpair`] when no damped step reduced the residual.
    pub refinement_diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult<T> {
    pub lambda1: T,
    pub eigenfunction: ScalarField<T>,
    pub residual_norm: T,
    pub iterations: usize,
    /// `sup |u|` of the returned eigenfunction.
    pub amplitude_at_optimum: T,
    /// `R` of the first iterate with `B > 0`; `1 / initial_rayleigh` bounds `λ₁` from above.
    pub initial_rayleigh: T,
    pub trace: Vec<TracePoint<T>>,
    pub status: SolveStatus,
    pub flags: SolveFlags,
    pub seed: u64,
}

impl<T: Scalar> EigenResult<T> {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Product of `sin(π (x - lo) / (hi - lo))` over the axes, zero on the boundary.
pub fn sine_bump<T: Scalar>(grid: &GridSpec<T>) -> ScalarField<T> {
    let pi = T::lit(std::f64::consts::PI);
    ScalarField::from_fn(grid, |x| {
        grid.extents()
            .iter()
            .enumerate()
            .fold(T::one(), |acc, (axis, &(lo, hi))| acc * (pi * (x[axis] - lo) / (hi - lo)).sin())
    })
    .map(|f| {
        let values = (0..grid.node_count())
            .map(|k| if grid.is_boundary(k) { T::zero() } else { f.values()[k] })
            .collect();
        f.with_values(values)
    })
    .expect("sine bump is finite")
}

/// Deterministic initial guess: [`sine_bump`] times `1 + noise`.
pub fn initial_guess<T: Scalar>(grid: &GridSpec<T>, seed: u64) -> ScalarField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = sine_bump(grid)
        .into_values()
        .into_iter()
        .map(|v| {
            let noise: f64 = rng.gen_range(-1.0..1.0);
            v * (T::one() + T::lit(NOISE_AMPLITUDE * noise))
        })
        .collect();
    ScalarField::new(grid.clone(), values).expect("initial guess is finite")
}

/// Nodal average of `b⁺` over adjacent cells, used when the sine bump has `B ≤ 0`.
fn positive_part_guess<T: Scalar>(spec: &ProblemSpec<T>) -> Vec<T> {
    let grid = spec.grid();
    let mut values = vec![T::zero(); grid.node_count()];
    for cell in 0..grid.cell_count() {
        let bp = spec.coeffs().b_plus(cell);
        for &n in grid.cell_nodes(cell).as_slice() {
            if !grid.is_boundary(n) {
                values[n] = values[n] + bp;
            }
        }
    }
    values
}

struct State<T> {
    v: Vec<T>,
    a: T,
    b: T,
}

impl<T: Scalar> State<T> {
    fn new(v: Vec<T>, spec: &ProblemSpec<T>) -> Self {
        let (g, ma, mb) = energy_terms(&v, spec);
        Self { v, a: g + ma, b: mb }
    }

    fn rayleigh(&self) -> T {
        self.b / self.a
    }
}

fn sup_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Rescale `v` by the optimal amplitude (variable `p`) or to `sup|v| = 1`.
fn normalize<T: Scalar>(v: Vec<T>, spec: &ProblemSpec<T>, bracket: (T, T)) -> (State<T>, bool) {
    let (t, at_bound) = if spec.p().is_constant() {
        (T::one() / sup_abs(&v), false)
    } else {
        let c = best_amplitude(&v, spec, bracket.0, bracket.1);
        (c.t, c.at_bound)
    };
    (State::new(v.into_iter().map(|x| x * t).collect(), spec), at_bound)
}

fn residual_of<T: Scalar>(s: &State<T>, spec: &ProblemSpec<T>) -> (Vec<T>, T) {
    let r = residual_vector(&s.v, s.a / s.b, spec);
    let n = residual_norm(spec.grid(), &r);
    (r, n)
}

fn curvature<T: Scalar>(v: &[T], spec: &ProblemSpec<T>, map: &InteriorMap) -> Result<linalg::CholeskyFactor<T>> {
    // (p - 1) is raised to 1 below p = 2 for the same majorization reason.
    curvature_matrix(v, spec, map, |cell, m, p| spec.a_at(cell) * (p - T::one()).max(T::one()) * m.powf(p - T::lit(2.0)))
}

fn ascent<T: Scalar>(
    spec: &ProblemSpec<T>,
    opts: &SolverOptions,
    map: &InteriorMap,
    seed: u64,
) -> Result<Option<EigenResult<T>>> {
    let grid = spec.grid();
    let bracket = (T::lit(opts.amplitude_bracket.0), T::lit(opts.amplitude_bracket.1));
    let tol = T::lit(opts.tolerance);
    let eps = T::epsilon();

    let mut v0 = initial_guess(grid, seed).into_values();
    if !(State::new(v0.clone(), spec).b > T::zero()) {
        v0 = positive_part_guess(spec);
        if sup_abs(&v0) == T::zero() || !(State::new(v0.clone(), spec).b > T::zero()) {
            return Ok(None);
        }
    }
    let (mut state, mut at_bound) = normalize(v0, spec, bracket);
    if !(state.b > T::zero() && state.a > T::zero()) {
        return Ok(None);
    }
    let initial_rayleigh = state.rayleigh();
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    let (mut r, mut res) = residual_of(&state, spec);
    for it in 0..opts.max_iterations {
        iterations = it;
        trace.push(TracePoint { iteration: it, rayleigh: state.rayleigh(), residual: res });
        if res <= tol {
            status = SolveStatus::Converged;
            break;
        }
        let factor = curvature(&state.v, spec, map)?;
        let rr = map.gather(&r);
        let z = factor.solve(&rr);
        let fz: T = rr.iter().zip(&z).map(|(&x, &y)| x * y).sum();
        let slope = state.b / (state.a * state.a) * fz;
        let r0 = state.rayleigh();

        let mut alpha = T::one();
        let mut next = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = state.v.clone();
            map.scatter_add(&mut trial, &z, -alpha);
            let ts = State::new(trial, spec);
            if ts.a > T::zero() && ts.b > T::zero() {
                let rt = ts.rayleigh();
                if rt >= r0 + T::lit(ARMIJO_C1) * alpha * slope {
                    next = Some(normalize(ts.v, spec, bracket));
                    break;
                }
                if (rt - r0).abs() <= T::lit(ROUNDING_FACTOR) * eps * r0 {
                    // increase is below rounding: accept when the residual drops
                    let cand = normalize(ts.v, spec, bracket);
                    if residual_of(&cand.0, spec).1 < res {
                        next = Some(cand);
                        break;
                    }
                }
            }
            alpha = alpha / T::lit(2.0);
        }
        match next {
            Some((s, b)) => {
                state = s;
                at_bound = b;
                let (nr, nres) = residual_of(&state, spec);
                r = nr;
                res = nres;
                iterations = it + 1;
            }
            None => {
                status = SolveStatus::Stalled;
                break;
            }
        }
    }
    if status == SolveStatus::MaxIterations {
        trace.push(TracePoint { iteration: iterations, rayleigh: state.rayleigh(), residual: res });
    }

    let u: Vec<T> = state.v.iter().map(|x| x.abs()).collect();
    let fin = State::new(u, spec);
    let (_, res_final) = residual_of(&fin, spec);
    if status == SolveStatus::Converged && res_final > tol {
        status = SolveStatus::Stalled;
    }
    let amplitude = sup_abs(&fin.v);
    Ok(Some(EigenResult {
        lambda1: fin.a / fin.b,
        eigenfunction: ScalarField::new(grid.clone(), fin.v)?,
        residual_norm: res_final,
        iterations,
        amplitude_at_optimum: amplitude,
        initial_rayleigh,
        trace,
        status,
        flags: SolveFlags { amplitude_at_bound: at_bound, refinement_diverged: false },
        seed,
    }))
}

/// Ordering among restarts: converged first, then smaller `λ₁` (relative
/// `1e-9`), then smaller residual, then smaller seed.
fn better<T: Scalar>(cand: &EigenResult<T>, best: &EigenResult<T>) -> bool {
    if cand.converged() != best.converged() {
        return cand.converged();
    }
    let rel = T::lit(1e-9) * best.lambda1.abs().max(T::min_positive_value());
    if (cand.lambda1 - best.lambda1).abs() > rel {
        return cand.lambda1 < best.lambda1;
    }
    if cand.residual_norm != best.residual_norm {
        return cand.residual_norm < best.residual_norm;
    }
    cand.seed < best.seed
}

/// Principal eigenpair of the discrete problem.
///
/// A run that fails to reach the tolerance is still returned, with its status
/// and trace. [`Error::DegenerateB`] is reported when no run finds `B > 0`.
pub fn solve_first_eigenvalue<T: Scalar>(spec: &ProblemSpec<T>, opts: &SolverOptions) -> Result<EigenResult<T>> {
    opts.validate()?;
    let grid = spec.grid();
    if (0..grid.cell_count()).all(|c| spec.coeffs().b_plus(c) <= T::zero()) {
        return Err(Error::DegenerateB);
    }
    let map = InteriorMap::new(grid);
    if map.len() == 0 {
        return Err(Error::InvalidGrid("grid has no interior nodes".into()));
    }
    let mut best: Option<EigenResult<T>> = None;
    for r in 0..opts.restarts {
        let seed = opts.seed.wrapping_add(r as u64);
        if let Some(res) = ascent(spec, opts, &map, seed)? {
            if best.as_ref().map_or(true, |b| better(&res, b)) {
                best = Some(res);
            }
        }
    }
    best.ok_or(Error::DegenerateB)
}

/// Damped Newton-like polishing of an approximate eigenpair.
///
/// Steps `u + ω d` with `ω ∈ {1, 1/2, 1/4, 1/8}` are accepted only when the
/// residual decreases. If the first sweep makes no progress and the input is
/// above tolerance, the input is returned unchanged with
/// `flags.refinement_diverged` set.
pub fn refine_eigenpair<T: Scalar>(
    u: &ScalarField<T>,
    spec: &ProblemSpec<T>,
    opts: &SolverOptions,
) -> Result<EigenResult<T>> {
    opts.validate()?;
    u.grid().ensure_same(spec.grid())?;
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let grid = spec.grid();
    let map = InteriorMap::new(grid);
    let bracket = (T::lit(opts.amplitude_bracket.0), T::lit(opts.amplitude_bracket.1));
    let tol = T::lit(opts.tolerance);

    let mut v = u.values().to_vec();
    for k in 0..v.len() {
        if grid.is_boundary(k) {
            v[k] = T::zero();
        }
    }
    let mut state = State::new(v, spec);
    if !(state.b > T::zero()) {
        return Err(Error::DegenerateB);
    }
    let initial_rayleigh = state.rayleigh();
    let (mut r, mut res) = residual_of(&state, spec);
    let input_residual = res;
    let mut trace = vec![TracePoint { iteration: 0, rayleigh: state.rayleigh(), residual: res }];
    let mut at_bound = false;
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIterations;
    let mut diverged = false;

    for it in 0..opts.max_iterations {
        if res <= tol {
            status = SolveStatus::Converged;
            break;
        }
        let factor = curvature(&state.v, spec, &map)?;
        let z = factor.solve(&map.gather(&r));
        let mut accepted = None;
        for k in 0..4 {
            let omega = T::lit(0.5f64.powi(k));
            let mut trial = state.v.clone();
            map.scatter_add(&mut trial, &z, -omega);
            if sup_abs(&trial) == T::zero() {
                continue;
            }
            let (cand, b) = normalize(trial, spec, bracket);
            if !(cand.a > T::zero() && cand.b > T::zero()) {
                continue;
            }
            let (cr, cres) = residual_of(&cand, spec);
            if cres < res {
                accepted = Some((cand, b, cr, cres));
                break;
            }
        }
        match accepted {
            Some((s, b, cr, cres)) => {
                state = s;
                at_bound = b;
                r = cr;
                res = cres;
                iterations = it + 1;
                trace.push(TracePoint { iteration: it + 1, rayleigh: state.rayleigh(), residual: res });
            }
            None => {
                if it == 0 && input_residual > tol {
                    diverged = true;
                }
                status = SolveStatus::Stalled;
                break;
            }
        }
    }
    if diverged {
        let s = State::new(u.values().to_vec(), spec);
        return Ok(EigenResult {
            lambda1: s.a / s.b,
            eigenfunction: u.clone(),
            residual_norm: input_residual,
            iterations: 0,
            amplitude_at_optimum: u.max_abs(),
            initial_rayleigh,
            trace,
            status: SolveStatus::Stalled,
            flags: SolveFlags { amplitude_at_bound: false, refinement_diverged: true },
            seed: opts.seed,
        });
    }
    let amplitude = sup_abs(&state.v);
    Ok(EigenResult {
        lambda1: state.a / state.b,
        eigenfunction: ScalarField::new(grid.clone(), state.v)?,
        residual_norm: res,
        iterations,
        amplitude_at_optimum: amplitude,
        initial_rayleigh,
        trace,
        status,
        flags: SolveFlags { amplitude_at_bound: at_bound, refinement_diverged: false },
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::fields::{validate_exponent, CoefficientFields};
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn spec_1d(n: usize, p: &str, a: f64, b: &str) -> ProblemSpec<f64> {
        let g = build_grid(1, &[(0.0f64, 1.0)], &[n]).unwrap();
        let p = validate_exponent(Expression::parse(p).unwrap().on_cells(&g).unwrap()).unwrap();
        let b = Expression::parse(b).unwrap().on_cells(&g).unwrap();
        let c = CoefficientFields::new(crate::expr::CellField::constant(&g, a), b).unwrap();
        ProblemSpec::new(p, c).unwrap()
    }

    #[test]
    fn p2_interval_matches_discrete_formula() {
        let n = 129;
        let spec = spec_1d(n, "2", 0.0, "1");
        let res = solve_first_eigenvalue(&spec, &SolverOptions::default()).unwrap();
        assert!(res.converged(), "{:?} {}", res.status, res.residual_norm);
        let h = 1.0 / (n as f64 - 1.0);
        let exact = 2.0 * 4.0 * (PI * h / 2.0).tan().powi(2) / (h * h);
        assert!((res.lambda1 - exact).abs() < 1e-9 * exact, "{} vs {exact}", res.lambda1);
        assert!(res.eigenfunction.values().iter().all(|&x| x >= 0.0));
        assert!((res.amplitude_at_optimum - 1.0).abs() < 1e-12);
        assert!(res.lambda1 <= 1.0 / res.initial_rayleigh * (1.0 + 1e-12));
    }

    #[test]
    fn variable_exponent_converges() {
        let spec = spec_1d(129, "2+x", 0.0, "1");
        let res = solve_first_eigenvalue(&spec, &SolverOptions::default()).unwrap();
        assert!(res.converged(), "{:?} {}", res.status, res.residual_norm);
        assert!(!res.flags.amplitude_at_bound);
    }

    #[test]
    fn invalid_options_rejected() {
        let spec = spec_1d(9, "2", 0.0, "1");
        let opts = SolverOptions { amplitude_bracket: (2.0, 3.0), ..Default::default() };
        assert!(matches!(solve_first_eigenvalue(&spec, &opts), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn refine_keeps_converged_pair() {
        let spec = spec_1d(65, "2", 1.0, "1");
        let res = solve_first_eigenvalue(&spec, &SolverOptions::default()).unwrap();
        let again = refine_eigenpair(&res.eigenfunction, &spec, &SolverOptions::default()).unwrap();
        assert!(again.converged());
        assert!((again.lambda1 - res.lambda1).abs() < 1e-10 * res.lambda1);
    }

    #[test]
    fn refine_from_rough_guess() {
        let spec = spec_1d(65, "2", 0.0, "1");
        let u = Expression::parse("x*(1-x)").unwrap().on_nodes(spec.grid()).unwrap();
        let res = refine_eigenpair(&u, &spec, &SolverOptions::default()).unwrap();
        assert!(res.converged());
        assert!(!res.flags.refinement_diverged);
    }

    #[test]
    fn refine_rejects_zero() {
        let spec = spec_1d(9, "2", 0.0, "1");
        let u = ScalarField::zeros(spec.grid());
        assert!(matches!(refine_eigenpair(&u, &spec, &SolverOptions::default()), Err(Error::ZeroField)));
    }

    #[test]
    fn sign_changing_weight() {
        let spec = spec_1d(65, "2", 0.0, "x - 0.3");
        let res = solve_first_eigenvalue(&spec, &SolverOptions::default()).unwrap();
        assert!(res.converged(), "{:?} {}", res.status, res.residual_norm);
        assert!(res.lambda1 > 0.0);
    }
}
