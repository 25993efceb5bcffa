//! Configuration, orchestration and reporting for `pxlap`.
//!
//! A run builds the problem from a [`RunConfig`], solves for the first
//! eigenpair, runs the enabled checks and writes `report.json`,
//! `eigenfunction.csv`, `trace.csv` and one `check_<name>.csv` per check.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{CheckConfig, DomainConfig, RunConfig};
pub use plot::{emit_plot_data, PlotKind};
pub use report::{CheckReport, RunReport, SolverSection, Table};
pub use run::{build_problem, execute, run_config, write_outputs, Execution, RunMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pxlap_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report error: {0}")]
    Report(String),
    #[error("report has no {0} section")]
    MissingSection(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(pxlap_core::Error::DegenerateB) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}
