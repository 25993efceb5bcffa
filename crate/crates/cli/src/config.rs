//! Run configuration (JSON). See `schema/run_config.schema.json` for the
//! documented format.

use std::collections::BTreeSet;
use std::path::Path;

use pxlap_core::analysis::MonotoneMap;
use pxlap_core::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dimension: usize,
    pub extents: Vec<[f64; 2]>,
    pub node_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    /// Exponent `p(x)`, in the expression grammar.
    pub p: String,
    #[serde(default = "zero_expr")]
    pub a: String,
    #[serde(default = "one_expr")]
    pub b: String,
    /// Solver options; `seed` here is replaced by the top-level seed.
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
}

fn zero_expr() -> String {
    "0".into()
}

fn one_expr() -> String {
    "1".into()
}

fn default_output_dir() -> String {
    "pxlap-out".into()
}

fn default_true() -> bool {
    true
}

fn default_identity_tol() -> f64 {
    1e-6
}

fn default_samples() -> usize {
    64
}

fn default_factor() -> f64 {
    1.1
}

fn default_collinearity_gap() -> f64 {
    1e-6
}

fn default_gamma() -> f64 {
    1.0
}

fn default_comparison_tol() -> f64 {
    1e-8
}

fn default_moser_count() -> usize {
    200
}

fn default_moser_iterations() -> usize {
    50
}

/// One enabled check. Each kind may appear at most once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckConfig {
    /// `|J_{λ₁}(u₁)| ≤ relative_tolerance · A(u₁)`.
    EigenIdentity {
        #[serde(default = "default_identity_tol")]
        relative_tolerance: f64,
    },
    /// `1/(Ĉ max b) ≤ λ₁ ≤ 1/R(u₀)`.
    Bounds {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        sample_seed: u64,
    },
    /// Sign of `J_λ(u₁)` at `λ = factor · λ₁`.
    Nonexistence {
        #[serde(default = "default_factor")]
        factor: f64,
    },
    /// Collinearity of a second solve with another seed, `> 1 - max_gap`.
    Simplicity {
        #[serde(default)]
        second_seed: Option<u64>,
        #[serde(default = "default_collinearity_gap")]
        max_gap: f64,
    },
    Hopf {
        #[serde(default)]
        margin: Option<f64>,
    },
    Caccioppoli {
        center: Vec<f64>,
        levels: Vec<f64>,
        /// `(s, t, R)` triples.
        radii: Vec<[f64; 3]>,
        #[serde(default = "default_true")]
        refine: bool,
    },
    Oscillation {
        center: Vec<f64>,
        radii: Vec<f64>,
        /// Lower bound for the fitted exponent; defaults to `0.9 p⁻/p⁺`.
        #[serde(default)]
        min_exponent: Option<f64>,
        #[serde(default = "default_true")]
        refine: bool,
    },
    Harnack {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_true")]
        refine: bool,
    },
    SpInequality {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    /// Two auxiliary solves with ordered sources `f1 ≤ f2`.
    Comparison {
        map: MonotoneMap,
        f1: String,
        f2: String,
        #[serde(default = "default_comparison_tol")]
        tolerance: f64,
    },
    Moser {
        #[serde(default = "default_moser_count")]
        count: usize,
        #[serde(default = "default_moser_iterations")]
        iterations: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl CheckConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CheckConfig::EigenIdentity { .. } => "eigen_identity",
            CheckConfig::Bounds { .. } => "bounds",
            CheckConfig::Nonexistence { .. } => "nonexistence",
            CheckConfig::Simplicity { .. } => "simplicity",
            CheckConfig::Hopf { .. } => "hopf",
            CheckConfig::Caccioppoli { .. } => "caccioppoli",
            CheckConfig::Oscillation { .. } => "oscillation",
            CheckConfig::Harnack { .. } => "harnack",
            CheckConfig::SpInequality { .. } => "sp_inequality",
            CheckConfig::Comparison { .. } => "comparison",
            CheckConfig::Moser { .. } => "moser",
        }
    }

    fn center(&self) -> Option<&[f64]> {
        match self {
            CheckConfig::Caccioppoli { center, .. }
            | CheckConfig::Oscillation { center, .. }
            | CheckConfig::Harnack { center, .. }
            | CheckConfig::SpInequality { center, .. } => Some(center),
            _ => None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Structural checks that serde cannot express. Grid, expression and
    /// exponent validation happen when the problem is built.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.domain.dimension;
        if self.domain.extents.len() != d || self.domain.node_counts.len() != d {
            return Err(CliError::Config(format!(
                "domain needs {d} extents and {d} node counts"
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &self.checks {
            if !seen.insert(c.name()) {
                return Err(CliError::Config(format!("check `{}` listed twice", c.name())));
            }
            if let Some(center) = c.center() {
                if center.len() != d {
                    return Err(CliError::Config(format!(
                        "check `{}`: center has {} coordinates, domain has {d}",
                        c.name(),
                        center.len()
                    )));
                }
            }
        }
        let mut solver = self.solver.clone();
        solver.seed = self.seed;
        solver.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Solver options with the top-level seed applied.
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { seed: self.seed, ..self.solver.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"domain": {"dimension": 1, "extents": [[0, 1]], "node_counts": [65]}, "p": "2"}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.a, "0");
        assert_eq!(c.b, "1");
        assert!(c.checks.is_empty());
        assert_eq!(c.solver, SolverOptions::default());
    }

    #[test]
    fn duplicate_checks_rejected() {
        let text = r#"{"domain": {"dimension": 1, "extents": [[0, 1]], "node_counts": [65]}, "p": "2",
            "checks": [{"kind": "hopf"}, {"kind": "hopf", "margin": 0.1}]}"#;
        assert!(matches!(RunConfig::from_json(text), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"domain": {"dimension": 1, "extents": [[0, 1]], "node_counts": [65]}, "p": "2", "q": "3"}"#;
        assert!(RunConfig::from_json(text).is_err());
        let text = r#"{"domain": {"dimension": 1, "extents": [[0, 1]], "node_counts": [65]}, "p": "2",
            "checks": [{"kind": "nope"}]}"#;
        assert!(RunConfig::from_json(text).is_err());
    }

    #[test]
    fn center_dimension_checked() {
        let text = r#"{"domain": {"dimension": 1, "extents": [[0, 1]], "node_counts": [65]}, "p": "2",
            "checks": [{"kind": "harnack", "center": [0.5, 0.5], "radius": 0.25}]}"#;
        assert!(RunConfig::from_json(text).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"domain": {"dimension": 1, "extents": [[0, 1]], "node_counts": [65]}, "p": "2+x",
            "checks": [{"kind": "comparison", "map": {"kind": "linear", "slope": 1.0}, "f1": "1", "f2": "2"},
                       {"kind": "moser"}]}"#;
        let c = RunConfig::from_json(text).unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
