use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ranassure_core::error::Error;
use ranassure_core::harness::{cmd_calibrate, cmd_compare, cmd_run, RunOptions};
use ranassure_core::pipeline::Mode;

#[derive(Parser)]
#[command(name = "ranassure", version, about = "Verified RAN load-balancing pipeline on a deterministic KPI simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Baseline,
    NoAgent,
    Agentic,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Baseline => Mode::Baseline,
            ModeArg::NoAgent => Mode::NoAgent,
            ModeArg::Agentic => Mode::Agentic,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write telemetry, decisions, audit log, charts and a report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "agentic")]
        mode: ModeArg,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Route agent messages through the framed stream transport.
        #[arg(long)]
        wire: bool,
    },
    /// Tabulate and plot two or more run directories of the same scenario.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Directory for compare.md and charts; defaults to the first run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit simulator coefficients to observed aggregates and write the fitted scenario.
    Calibrate {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "scenarios/surge_drift.json")]
        base: PathBuf,
    },
}

fn exec(cli: Cli) -> ranassure_core::error::Result<()> {
    match cli.cmd {
        Cmd::Run { scenario, mode, seed, out, wire } => {
            let report = cmd_run(&scenario, &RunOptions { mode: mode.into(), seed, wire }, &out)?;
            print!("{}", report.to_markdown());
            println!("\nwrote {}", out.display());
        }
        Cmd::Compare { dirs, out } => {
            let cmp = cmd_compare(&dirs, out.as_deref())?;
            print!("{}", cmp.markdown);
        }
        Cmd::Calibrate { targets, out, base } => {
            let cal = cmd_calibrate(&targets, &out, &base)?;
            print!("{}", cal.to_text());
            println!("\nwrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match exec(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Invalid(_) | Error::Csv { .. } | Error::Json(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
