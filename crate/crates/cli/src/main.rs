use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pxlap_cli::{emit_plot_data, run_config, CliError, PlotKind, RunMode, RunReport, EXIT_OK};
use pxlap_core::solver::oracle::constant_p_closed_form;
use pxlap_core::constant_p_oracle;

#[derive(Parser)]
#[command(name = "pxlap", version, about = "First eigenvalue of the p(x)-Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed (overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the first eigenpair and write the report.
    Solve { config: PathBuf },
    /// Solve and run every check listed in the config.
    Check { config: PathBuf },
    /// Shooting value of the first eigenvalue for constant p on (0, length).
    Oracle {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        length: f64,
    },
    /// Extract plot data (CSV) from a report.
    Plot {
        report: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Eigenfunction,
    Trace,
    Oscillation,
}

impl From<Kind> for PlotKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Eigenfunction => PlotKind::Eigenfunction,
            Kind::Trace => PlotKind::Trace,
            Kind::Oscillation => PlotKind::Oscillation,
        }
    }
}

fn summarize(report: &RunReport) {
    let s = &report.solver;
    println!(
        "lambda1 = {:.12}  residual = {:.3e}  iterations = {}  status = {:?}",
        s.lambda1, s.residual_norm, s.iterations, s.status
    );
    for c in &report.checks {
        let tag = match (c.applicable, c.passed) {
            (false, _) => "N/A ",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        println!("{tag} {:<15} {}", c.name, c.summary);
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve { config } => {
            let report = run_config(&config, RunMode::Solve, cli.out.as_deref(), cli.seed)?;
            if !cli.quiet {
                summarize(&report);
            }
            Ok(report.exit_code())
        }
        Command::Check { config } => {
            let report = run_config(&config, RunMode::Check, cli.out.as_deref(), cli.seed)?;
            if !cli.quiet {
                summarize(&report);
            }
            Ok(report.exit_code())
        }
        Command::Oracle { p, length } => {
            let shot = constant_p_oracle(p, length).map_err(|e| CliError::Config(e.to_string()))?;
            let exact = constant_p_closed_form(p, length).map_err(|e| CliError::Config(e.to_string()))?;
            if cli.quiet {
                println!("{shot}");
            } else {
                println!("lambda1 (shooting)    = {shot:.15}");
                println!("lambda1 (closed form) = {exact:.15}");
            }
            Ok(EXIT_OK)
        }
        Command::Plot { report, kind } => {
            let text = std::fs::read_to_string(&report)?;
            let report = RunReport::from_json(&text)?;
            let kind = PlotKind::from(kind);
            let csv = emit_plot_data(&report, kind)?;
            match cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let name = match kind {
                        PlotKind::Eigenfunction => "eigenfunction",
                        PlotKind::Trace => "trace",
                        PlotKind::Oscillation => "oscillation",
                    };
                    std::fs::write(dir.join(format!("plot_{name}.csv")), csv)?;
                }
                None => print!("{csv}"),
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("pxlap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
