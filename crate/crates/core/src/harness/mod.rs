//! Scenario runner, comparison tables, calibration, and charts.

pub mod calibrate;
pub mod compare;
pub mod report;
pub mod run;
pub mod svg;

pub use calibrate::{calibrate, cmd_calibrate, fit_coefficients, Calibration, CalibrationTargets, FittedCoefficients};
pub use compare::{cmd_compare, Comparison, ComparisonRow};
pub use report::{aggregate, percentile, CellAggregates, DeploymentSummary, RunReport};
pub use run::{cmd_run, run_mode, ModeRun, RunOptions, ScenarioFile};

use crate::error::Result;

const SURGE_DRIFT: &str = include_str!("../../../../scenarios/surge_drift.json");
const SURGE_NODRIFT: &str = include_str!("../../../../scenarios/surge_nodrift.json");

/// The shipped reference scenario, with or without the neighbor drift.
pub fn reference_scenario(drift: bool) -> Result<ScenarioFile> {
    ScenarioFile::from_json(if drift { SURGE_DRIFT } else { SURGE_NODRIFT })
}
