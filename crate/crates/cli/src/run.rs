use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use pxlap_core::analysis::{
    caccioppoli_constant, comparison_check, harnack_bound_check, hopf_boundary_check, moser_limit_check,
    moser_random_family, nonexistence_check, oscillation_profile, resolution_stable, simplicity_check,
    solve_monotone_problem, sp_inequality_check, ComparisonOutcome, ConstantEstimate, RadiusTriple,
    STABILITY_FACTOR,
};
use pxlap_core::energy::{energy_a, energy_breakdown, functional_j, rayleigh, ProblemSpec};
use pxlap_core::expr::Expression;
use pxlap_core::fields::{validate_exponent, CoefficientFields};
use pxlap_core::grid::build_grid;
use pxlap_core::modular::poincare_constant_estimate;
use pxlap_core::solver::{sine_bump, solve_first_eigenvalue, EigenResult, SolverOptions};
use serde_json::json;

use crate::config::{CheckConfig, RunConfig};
use crate::report::{CheckReport, RunReport, SolverSection, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Solver only; configured checks are ignored.
    Solve,
    /// Solver plus every configured check.
    Check,
}

impl RunMode {
    fn label(self) -> &'static str {
        match self {
            RunMode::Solve => "solve",
            RunMode::Check => "check",
        }
    }
}

/// A finished run: the report plus the CSV tables to write next to it.
#[derive(Debug, Clone)]
pub struct Execution {
    pub report: RunReport,
    pub trace: Table,
    pub check_tables: Vec<(String, Table)>,
}

fn config_err(what: &str) -> impl Fn(pxlap_core::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{what}: {e}"))
}

/// Build the problem on the configured grid, or on its 2× refinement.
pub fn build_problem(cfg: &RunConfig, refined: bool) -> Result<ProblemSpec<f64>, CliError> {
    let d = &cfg.domain;
    let extents: Vec<(f64, f64)> = d.extents.iter().map(|e| (e[0], e[1])).collect();
    let grid = build_grid(d.dimension, &extents, &d.node_counts).map_err(config_err("domain"))?;
    let grid = if refined { grid.refined() } else { grid };
    let sample = |name: &str, src: &str| {
        Expression::parse(src).and_then(|e| e.on_cells(&grid)).map_err(|e| CliError::Config(format!("{name}: {e}")))
    };
    let p = validate_exponent(sample("p", &cfg.p)?).map_err(config_err("exponent p"))?;
    let coeffs = CoefficientFields::new(sample("a", &cfg.a)?, sample("b", &cfg.b)?).map_err(config_err("coefficients"))?;
    ProblemSpec::new(p, coeffs).map_err(config_err("problem"))
}

struct Context<'a> {
    cfg: &'a RunConfig,
    spec: &'a ProblemSpec<f64>,
    opts: SolverOptions,
    result: &'a EigenResult<f64>,
    fine: Option<(ProblemSpec<f64>, EigenResult<f64>)>,
}

impl<'a> Context<'a> {
    fn fine(&mut self) -> Result<&(ProblemSpec<f64>, EigenResult<f64>), CliError> {
        if self.fine.is_none() {
            let spec = build_problem(self.cfg, true)?;
            let res = solve_first_eigenvalue(&spec, &self.opts)?;
            self.fine = Some((spec, res));
        }
        Ok(self.fine.as_ref().expect("just set"))
    }
}

struct Outcome {
    report: CheckReport,
    table: Table,
}

fn outcome(name: &str, passed: bool, summary: String, details: serde_json::Value, table: Table) -> Outcome {
    Outcome {
        report: CheckReport { name: name.into(), passed, applicable: true, summary, details },
        table,
    }
}

fn to_value<S: serde::Serialize>(v: &S) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn estimate_table(est: &ConstantEstimate<f64>) -> Table {
    let mut header: Vec<&str> = est.parameter_names.iter().map(String::as_str).collect();
    header.extend(["lhs", "rhs", "remainder", "ratio"]);
    let mut t = Table::new(&header);
    for w in &est.witnesses {
        let mut row = w.parameters.clone();
        row.extend([w.lhs, w.rhs, w.remainder, w.ratio()]);
        t.push(row);
    }
    t
}

/// Finite estimate, stable against the refined grid when one is given.
fn stability(coarse: &ConstantEstimate<f64>, fine: Option<&ConstantEstimate<f64>>) -> (bool, Option<bool>) {
    let stable = fine.map(|f| resolution_stable(coarse.estimated_c, f.estimated_c, STABILITY_FACTOR));
    let finite = coarse.is_finite() && fine.map_or(true, |f| f.is_finite());
    (finite && stable != Some(false), stable)
}

fn triples(radii: &[[f64; 3]]) -> Vec<RadiusTriple<f64>> {
    radii.iter().map(|r| RadiusTriple { s: r[0], t: r[1], r: r[2] }).collect()
}

fn run_check(check: &CheckConfig, ctx: &mut Context) -> Result<Outcome, CliError> {
    let name = check.name();
    let u = &ctx.result.eigenfunction;
    let lambda1 = ctx.result.lambda1;
    Ok(match check {
        CheckConfig::EigenIdentity { relative_tolerance } => {
            let j = functional_j(u, lambda1, ctx.spec)?;
            let a = energy_a(u, ctx.spec)?;
            let passed = j.abs() <= relative_tolerance * a;
            let mut t = Table::new(&["j", "a", "relative"]);
            t.push(vec![j, a, j.abs() / a]);
            outcome(
                name,
                passed,
                format!("|J| / A = {:e}", j.abs() / a),
                json!({"j": j, "a": a, "relative_tolerance": relative_tolerance}),
                t,
            )
        }
        CheckConfig::Bounds { samples, sample_seed } => {
            let c_hat =
                poincare_constant_estimate(ctx.spec.grid(), ctx.spec.p(), *samples, *sample_seed, std::slice::from_ref(u))?;
            let b_max = ctx.spec.coeffs().b_sup();
            let lower = 1.0 / (c_hat * b_max);
            // Smooth witness when it has B > 0, else the solver's first iterate.
            let bump = rayleigh(&sine_bump(ctx.spec.grid()), ctx.spec)?;
            let upper = 1.0 / if bump > 0.0 { bump } else { ctx.result.initial_rayleigh };
            let slack = 1e-9 * lambda1;
            let passed = lower <= lambda1 + slack && lambda1 <= upper + slack;
            let mut t = Table::new(&["lower", "lambda1", "upper", "poincare_estimate", "b_max"]);
            t.push(vec![lower, lambda1, upper, c_hat, b_max]);
            outcome(
                name,
                passed,
                format!("{lower} <= {lambda1} <= {upper}"),
                json!({"lower": lower, "upper": upper, "lambda1": lambda1, "poincare_estimate": c_hat, "b_max": b_max}),
                t,
            )
        }
        CheckConfig::Nonexistence { factor } => {
            let out = nonexistence_check(ctx.result, factor * lambda1, ctx.spec)?;
            let passed = out.verdict && out.relative_gap <= 1e-10;
            let mut t = Table::new(&["lambda", "j", "identity", "relative_gap"]);
            t.push(vec![out.lambda, out.j, out.identity, out.relative_gap]);
            outcome(name, passed, format!("J = {:e} at lambda = {}", out.j, out.lambda), to_value(&out), t)
        }
        CheckConfig::Simplicity { second_seed, max_gap } => {
            let seed2 = second_seed.unwrap_or(ctx.opts.seed + ctx.opts.restarts as u64);
            let opts2 = SolverOptions { seed: seed2, ..ctx.opts.clone() };
            let other = solve_first_eigenvalue(ctx.spec, &opts2)?;
            let mut t = Table::new(&["seed", "second_seed", "collinearity", "lambda1", "second_lambda1"]);
            match simplicity_check(ctx.result, &other, ctx.opts.tolerance) {
                Ok(c) => {
                    t.push(vec![ctx.opts.seed as f64, seed2 as f64, c, lambda1, other.lambda1]);
                    outcome(
                        name,
                        c > 1.0 - max_gap,
                        format!("collinearity 1 - {:e}", 1.0 - c),
                        json!({"collinearity": c, "second_seed": seed2, "second_lambda1": other.lambda1}),
                        t,
                    )
                }
                Err(e) => outcome(name, false, e.to_string(), json!({"second_seed": seed2}), t),
            }
        }
        CheckConfig::Hopf { margin } => {
            let prof = hopf_boundary_check(u, *margin)?;
            let dim = ctx.spec.grid().dimension();
            let mut header = vec!["x", "y"][..dim].to_vec();
            header.push("outer_derivative");
            let mut t = Table::new(&header);
            for d in &prof.derivatives {
                let mut row = d.location.clone();
                row.push(d.outer_derivative);
                t.push(row);
            }
            outcome(
                name,
                prof.verdict.holds,
                format!("worst excess over -margin: {:e}", prof.verdict.worst_violation),
                to_value(&prof),
                t,
            )
        }
        CheckConfig::Caccioppoli { center, levels, radii, refine } => {
            let tr = triples(radii);
            let est = caccioppoli_constant(u, ctx.spec, center, levels, &tr)?;
            let fine = if *refine {
                let (fs, fr) = ctx.fine()?;
                Some(caccioppoli_constant(&fr.eigenfunction, fs, center, levels, &tr)?)
            } else {
                None
            };
            estimate_outcome(name, est, fine)
        }
        CheckConfig::Harnack { center, radius, refine } => {
            let est = harnack_bound_check(u, ctx.spec, center, *radius)?;
            let fine = if *refine {
                let (fs, fr) = ctx.fine()?;
                Some(harnack_bound_check(&fr.eigenfunction, fs, center, *radius)?)
            } else {
                None
            };
            estimate_outcome(name, est, fine)
        }
        CheckConfig::Oscillation { center, radii, min_exponent, refine } => {
            let prof = oscillation_profile(u, ctx.spec.p(), center, radii)?;
            let fine = if *refine {
                let (fs, fr) = ctx.fine()?;
                Some(oscillation_profile(&fr.eigenfunction, fs.p(), center, radii)?)
            } else {
                None
            };
            let min = min_exponent.unwrap_or(0.9 * prof.holder_exponent);
            let (ok, stable) = stability(&prof.estimate, fine.as_ref().map(|f| &f.estimate));
            let exponent_ok = prof.fitted_exponent.map_or(true, |e| e >= min);
            let mut t = Table::new(&["R", "osc", "bound"]);
            for i in 0..prof.radii.len() {
                t.push(vec![prof.radii[i], prof.oscillations[i], prof.bounds[i]]);
            }
            outcome(
                name,
                ok && exponent_ok,
                format!("C = {}, fitted exponent {:?} (min {min})", prof.estimate.estimated_c, prof.fitted_exponent),
                json!({
                    "profile": prof,
                    "min_exponent": min,
                    "fine_estimated_c": fine.as_ref().map(|f| f.estimate.estimated_c),
                    "stable_across_resolutions": stable,
                }),
                t,
            )
        }
        CheckConfig::SpInequality { center, radius, gamma } => {
            if ctx.spec.grid().dimension() < 2 {
                let mut o = outcome(name, true, "needs a 2D grid".into(), json!({}), Table::new(&["R"]));
                o.report.applicable = false;
                return Ok(o);
            }
            let est = sp_inequality_check(u, ctx.spec.p(), center, *radius, *gamma)?;
            let t = estimate_table(&est);
            outcome(
                name,
                est.is_finite(),
                format!("c = {}, chi = {:?}", est.estimated_c, est.chi),
                to_value(&est),
                t,
            )
        }
        CheckConfig::Comparison { map, f1, f2, tolerance } => {
            let grid = ctx.spec.grid();
            let sample = |src: &str| Expression::parse(src).and_then(|e| e.on_cells(grid));
            let (f1, f2) = (sample(f1).map_err(config_err("f1"))?, sample(f2).map_err(config_err("f2"))?);
            let max_it = ctx.opts.max_iterations;
            let s1 = solve_monotone_problem(ctx.spec, map, &f1, tolerance * 1e-2, max_it)?;
            let s2 = solve_monotone_problem(ctx.spec, map, &f2, tolerance * 1e-2, max_it)?;
            let out = comparison_check(&s1.solution, &s2.solution, map, ctx.spec, *tolerance)?;
            let mut t = Table::new(&["node", "u1", "u2"]);
            for k in 0..grid.node_count() {
                t.push(vec![k as f64, s1.solution.values()[k], s2.solution.values()[k]]);
            }
            let details = json!({
                "outcome": to_value(&out),
                "residuals": [s1.residual_norm, s2.residual_norm],
                "iterations": [s1.iterations, s2.iterations],
            });
            match out {
                ComparisonOutcome::Verdict(v) => outcome(
                    name,
                    v.holds,
                    format!("min(u2 - u1) violation {:e}", v.worst_violation),
                    details,
                    t,
                ),
                ComparisonOutcome::Inapplicable { reason } => {
                    let mut o = outcome(name, true, format!("inapplicable: {reason}"), details, t);
                    o.report.applicable = false;
                    o
                }
            }
        }
        CheckConfig::Moser { count, iterations, seed } => {
            let family = moser_random_family(*count, *iterations, *seed);
            let mut t = Table::new(&["c", "b", "beta", "x0", "x_final", "verdict"]);
            let mut failures = 0usize;
            let mut worst: f64 = 0.0;
            for params in &family {
                let out = moser_limit_check(params)?;
                let last = *out.iterates.last().expect("non-empty");
                if !out.verdict {
                    failures += 1;
                }
                worst = worst.max(if out.diverged { f64::INFINITY } else { last });
                t.push(vec![params.c, params.b, params.beta, params.x0, last, if out.verdict { 1.0 } else { 0.0 }]);
            }
            outcome(
                name,
                failures == 0,
                format!("{failures} of {count} sequences not below 1e-8 after {iterations} steps"),
                json!({"failures": failures, "count": count, "largest_final": worst}),
                t,
            )
        }
    })
}

fn estimate_outcome(name: &str, est: ConstantEstimate<f64>, fine: Option<ConstantEstimate<f64>>) -> Outcome {
    let (passed, stable) = stability(&est, fine.as_ref());
    let mut est = est;
    est.stable_across_resolutions = stable;
    let table = estimate_table(&est);
    outcome(
        name,
        passed,
        format!(
            "C = {}{}",
            est.estimated_c,
            fine.as_ref().map(|f| format!(", refined C = {}", f.estimated_c)).unwrap_or_default()
        ),
        json!({"estimate": est, "fine_estimate": fine}),
        table,
    )
}

/// Build, solve and (in check mode) run every enabled check, without I/O.
pub fn execute(cfg: &RunConfig, mode: RunMode) -> Result<Execution, CliError> {
    cfg.validate()?;
    let mut timing = BTreeMap::new();
    let t0 = Instant::now();
    let spec = build_problem(cfg, false)?;
    timing.insert("build".to_string(), t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let opts = cfg.solver_options();
    let result = solve_first_eigenvalue(&spec, &opts)?;
    timing.insert("solve".to_string(), t1.elapsed().as_secs_f64());

    let mut trace = Table::new(&["iteration", "rayleigh", "residual"]);
    for p in &result.trace {
        trace.push(vec![p.iteration as f64, p.rayleigh, p.residual]);
    }

    let mut checks = Vec::new();
    let mut check_tables = Vec::new();
    if mode == RunMode::Check {
        let t2 = Instant::now();
        let mut ctx = Context { cfg, spec: &spec, opts: opts.clone(), result: &result, fine: None };
        let mut sorted: Vec<&CheckConfig> = cfg.checks.iter().collect();
        sorted.sort_by_key(|c| c.name());
        for check in sorted {
            let o = if result.converged() {
                run_check(check, &mut ctx)?
            } else {
                let mut o = outcome(
                    check.name(),
                    false,
                    "skipped: solver did not converge".into(),
                    json!({}),
                    Table::new(&["skipped"]),
                );
                o.report.applicable = false;
                o
            };
            check_tables.push((o.report.name.clone(), o.table));
            checks.push(o.report);
        }
        timing.insert("checks".to_string(), t2.elapsed().as_secs_f64());
    }

    let energy = energy_breakdown(&result.eigenfunction, result.lambda1, &spec)?;
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: mode.label().to_string(),
        config: cfg.clone(),
        energy,
        solver: SolverSection::from(&result),
        eigenfunction: result.eigenfunction.clone(),
        checks,
        timing,
    };
    Ok(Execution { report, trace, check_tables })
}

/// Write `report.json`, `eigenfunction.csv`, `trace.csv` and the check tables.
pub fn write_outputs(exec: &Execution, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), exec.report.to_json()?)?;
    exec.report.eigenfunction.write_csv(fs::File::create(dir.join("eigenfunction.csv"))?)?;
    exec.trace.write_csv(fs::File::create(dir.join("trace.csv"))?)?;
    for (name, table) in &exec.check_tables {
        table.write_csv(fs::File::create(dir.join(format!("check_{name}.csv")))?)?;
    }
    Ok(())
}

/// Load a config, run it and write the outputs to `out` (or the configured
/// directory). Returns the report; its [`RunReport::exit_code`] gives the
/// process status.
pub fn run_config(path: &Path, mode: RunMode, out: Option<&Path>, seed: Option<u64>) -> Result<RunReport, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let exec = execute(&cfg, mode)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone().into());
    write_outputs(&exec, &dir)?;
    Ok(exec.report)
}
