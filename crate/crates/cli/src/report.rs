use std::collections::BTreeMap;
use std::io::Write;

use pxlap_core::energy::EnergyBreakdown;
use pxlap_core::grid::ScalarField;
use pxlap_core::solver::{EigenResult, SolveFlags, SolveStatus, TracePoint};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_NO_CONVERGENCE, EXIT_OK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    pub lambda1: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub amplitude_at_optimum: f64,
    pub initial_rayleigh: f64,
    pub status: SolveStatus,
    pub converged: bool,
    pub flags: SolveFlags,
    pub seed: u64,
    pub trace: Vec<TracePoint<f64>>,
}

impl From<&EigenResult<f64>> for SolverSection {
    fn from(r: &EigenResult<f64>) -> Self {
        Self {
            lambda1: r.lambda1,
            residual_norm: r.residual_norm,
            iterations: r.iterations,
            amplitude_at_optimum: r.amplitude_at_optimum,
            initial_rayleigh: r.initial_rayleigh,
            status: r.status,
            converged: r.converged(),
            flags: r.flags,
            seed: r.seed,
            trace: r.trace.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// `false` when a precondition failed; such checks do not count as failures.
    pub applicable: bool,
    pub summary: String,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub mode: String,
    pub config: RunConfig,
    pub energy: EnergyBreakdown<f64>,
    pub solver: SolverSection,
    pub eigenfunction: ScalarField<f64>,
    /// Sorted by name.
    pub checks: Vec<CheckReport>,
    /// Wall-clock seconds per phase; the only non-deterministic field.
    pub timing: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if !self.solver.converged {
            EXIT_NO_CONVERGENCE
        } else if !self.all_checks_passed() {
            EXIT_CHECK_FAILED
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Report(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Report(e.to_string()))
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Header plus numeric rows, written as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| CliError::Report(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| CliError::Report(e.to_string()))
    }
}
