use std::str::FromStr;

use pxlap_core::analysis::OscillationProfile;

use crate::report::{RunReport, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `(x[, y], value)` per node.
    Eigenfunction,
    /// `(iteration, rayleigh, residual)` per trace entry.
    Trace,
    /// `(R, osc, bound)` per radius of the oscillation check.
    Oscillation,
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "eigenfunction" => Ok(PlotKind::Eigenfunction),
            "trace" => Ok(PlotKind::Trace),
            "oscillation" => Ok(PlotKind::Oscillation),
            other => Err(CliError::Config(format!("unknown plot kind `{other}`"))),
        }
    }
}

/// CSV text for one section of a report.
pub fn emit_plot_data(report: &RunReport, kind: PlotKind) -> Result<String, CliError> {
    match kind {
        PlotKind::Eigenfunction => {
            let mut buf = Vec::new();
            report.eigenfunction.write_csv(&mut buf)?;
            String::from_utf8(buf).map_err(|e| CliError::Report(e.to_string()))
        }
        PlotKind::Trace => {
            let mut t = Table::new(&["iteration", "rayleigh", "residual"]);
            for p in &report.solver.trace {
                t.push(vec![p.iteration as f64, p.rayleigh, p.residual]);
            }
            t.to_csv_string()
        }
        PlotKind::Oscillation => {
            let check = report
                .check("oscillation")
                .ok_or_else(|| CliError::MissingSection("oscillation".into()))?;
            let prof: OscillationProfile<f64> = serde_json::from_value(check.details["profile"].clone())
                .map_err(|e| CliError::Report(format!("oscillation profile: {e}")))?;
            let mut t = Table::new(&["R", "osc", "bound"]);
            for i in 0..prof.radii.len() {
                t.push(vec![prof.radii[i], prof.oscillations[i], prof.bounds[i]]);
            }
            t.to_csv_string()
        }
    }
}
