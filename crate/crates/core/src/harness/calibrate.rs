//! Fits the shared per-user, efficiency and SINR coefficients to observed
//! eval-window aggregates and reports how well the fitted scenario reproduces
//! every target.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{aggregate, CellAggregates};
use super::run::{run_mode, ScenarioFile};
use crate::error::{Error, Result};
use crate::pipeline::{Mode, TrainingCache};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTarget {
    pub baseline: f64,
    pub no_agent: f64,
}

/// Observed eval-window means without control and with unverified offload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub target_capacity_mbps: f64,
    pub target_rrc: PairTarget,
    pub target_thr: PairTarget,
    pub target_prb: PairTarget,
    pub neighbor_prb: PairTarget,
    pub neighbor_prb_p95_no_agent: f64,
    pub target_sinr_gain_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedCoefficients {
    pub prb_per_ue: f64,
    pub efficiency: f64,
    pub sinr_slope_db: f64,
}

/// Closed-form solve: per-user PRB from the uncontrolled (users, PRB) pair,
/// efficiency from the offloaded (capacity, PRB, throughput) triple, SINR
/// slope from the SINR gain over the PRB drop.
pub fn fit_coefficients(t: &CalibrationTargets) -> Result<FittedCoefficients> {
    let bad = |why: &str| Err(Error::Config(format!("inconsistent targets: {why}")));
    if t.target_rrc.baseline <= 0.0 || !(0.0..1.0).contains(&t.target_prb.baseline) || t.target_prb.baseline <= 0.0 {
        return bad("baseline users and PRB must be positive with PRB below 1");
    }
    let prb_per_ue = t.target_prb.baseline / t.target_rrc.baseline;
    let free = t.target_capacity_mbps * (1.0 - t.target_prb.no_agent);
    if free <= 0.0 {
        return bad("offloaded PRB leaves no free capacity");
    }
    let efficiency = t.target_thr.no_agent / free;
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return bad(&format!("efficiency {efficiency:.4} outside (0, 1]"));
    }
    let drop = t.target_prb.baseline - t.target_prb.no_agent;
    if drop <= 0.0 {
        return bad("offload must lower target PRB to solve the SINR slope");
    }
    let sinr_slope_db = t.target_sinr_gain_db / drop;
    if sinr_slope_db < 0.0 {
        return bad("negative SINR slope");
    }
    Ok(FittedCoefficients { prb_per_ue, efficiency, sinr_slope_db })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub observed: f64,
    pub simulated: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub coefficients: FittedCoefficients,
    pub residuals: Vec<Residual>,
}

impl Calibration {
    pub fn consistent(&self) -> bool {
        self.residuals.iter().all(|r| r.within)
    }

    pub fn to_text(&self) -> String {
        let c = &self.coefficients;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "prb_per_ue = {:.6}\nefficiency = {:.4}\nsinr_slope_db = {:.3}\n",
            c.prb_per_ue, c.efficiency, c.sinr_slope_db
        );
        let _ = writeln!(s, "{:<28} {:>10} {:>10} {:>10} {:>9}  ok", "aggregate", "observed", "simulated", "residual", "tol");
        for r in &self.residuals {
            let _ = writeln!(
                s,
                "{:<28} {:>10.4} {:>10.4} {:>+10.4} {:>9.4}  {}",
                r.name,
                r.observed,
                r.simulated,
                r.residual,
                r.tolerance,
                if r.within { "yes" } else { "NO" }
            );
        }
        if !self.consistent() {
            let _ = writeln!(s, "\nsome targets are not reproduced within tolerance by the shared-coefficient model");
        }
        s
    }
}

/// Applies the coefficients to every cell of `base`.
pub fn apply(base: &ScenarioFile, c: &FittedCoefficients) -> ScenarioFile {
    let mut f = base.clone();
    for cell in &mut f.scenario.cells {
        cell.params.prb_per_ue = c.prb_per_ue;
        cell.params.efficiency = c.efficiency;
        cell.params.sinr_slope_db = c.sinr_slope_db;
    }
    f
}

fn residuals(t: &CalibrationTargets, target: [&CellAggregates; 2], neighbor: [&CellAggregates; 2]) -> Vec<Residual> {
    let [tb, tn] = target;
    let [nb, nn] = neighbor;
    let row = |name: &str, observed: f64, simulated: f64, tolerance: f64| Residual {
        name: name.into(),
        observed,
        simulated,
        residual: simulated - observed,
        tolerance,
        within: (simulated - observed).abs() <= tolerance,
    };
    vec![
        row("target rrc (baseline)", t.target_rrc.baseline, tb.mean_rrc, 8.0),
        row("target rrc (no agent)", t.target_rrc.no_agent, tn.mean_rrc, 8.0),
        row("target thr (baseline)", t.target_thr.baseline, tb.mean_thr, 0.1 * t.target_thr.baseline),
        row("target thr (no agent)", t.target_thr.no_agent, tn.mean_thr, 0.1 * t.target_thr.no_agent),
        row("target prb (baseline)", t.target_prb.baseline, tb.mean_prb, 0.05),
        row("target prb (no agent)", t.target_prb.no_agent, tn.mean_prb, 0.05),
        row("neighbor prb (baseline)", t.neighbor_prb.baseline, nb.mean_prb, 0.05),
        row("neighbor prb (no agent)", t.neighbor_prb.no_agent, nn.mean_prb, 0.05),
        row("neighbor p95 prb (no agent)", t.neighbor_prb_p95_no_agent, nn.p95_prb, 0.05),
        row("target sinr gain (dB)", t.target_sinr_gain_db, tn.mean_sinr - tb.mean_sinr, 0.5),
    ]
}

/// Fits coefficients, simulates baseline and unverified offload with them,
/// and compares every target.
pub fn calibrate(targets: &CalibrationTargets, base: &ScenarioFile) -> Result<(ScenarioFile, Calibration)> {
    let coefficients = fit_coefficients(targets)?;
    let fitted = apply(base, &coefficients);
    fitted.validate()?;
    let cache = TrainingCache::default();
    let w = fitted.scenario.eval_window;
    let aggs: Vec<Vec<CellAggregates>> = [Mode::Baseline, Mode::NoAgent]
        .into_iter()
        .map(|m| run_mode(&fitted, m, &cache, false).map(|r| aggregate(&r.log, w)))
        .collect::<Result<_>>()?;
    let pick = |mode: usize, cell: &crate::kpi::CellId| {
        aggs[mode]
            .iter()
            .find(|c| &c.cell_id == cell)
            .ok_or_else(|| Error::InsufficientData(format!("no eval-window data for {cell}")))
    };
    let (tc, nc) = (&fitted.scenario.target_cell, fitted.neighbor());
    let res = residuals(targets, [pick(0, tc)?, pick(1, tc)?], [pick(0, nc)?, pick(1, nc)?]);
    Ok((fitted.clone(), Calibration { coefficients, residuals: res }))
}

pub fn cmd_calibrate(targets: &Path, out: &Path, base: &Path) -> Result<Calibration> {
    let t: CalibrationTargets = serde_json::from_str(&std::fs::read_to_string(targets)?)
        .map_err(|e| Error::Config(format!("targets file: {e}")))?;
    let base = ScenarioFile::load(base)?;
    let (fitted, cal) = calibrate(&t, &base)?;
    fitted.save(out)?;
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_targets() -> CalibrationTargets {
        CalibrationTargets {
            target_capacity_mbps: 200.0,
            target_rrc: PairTarget { baseline: 175.1, no_agent: 157.1 },
            target_thr: PairTarget { baseline: 59.9, no_agent: 72.4 },
            target_prb: PairTarget { baseline: 0.671, no_agent: 0.598 },
            neighbor_prb: PairTarget { baseline: 0.413, no_agent: 0.586 },
            neighbor_prb_p95_no_agent: 0.663,
            target_sinr_gain_db: 1.14,
        }
    }

    #[test]
    fn closed_form_examples() {
        let c = fit_coefficients(&reference_targets()).unwrap();
        assert!((c.prb_per_ue - 0.671 / 175.1).abs() < 1e-12);
        assert!((c.prb_per_ue - 0.003832).abs() < 5e-7);
        assert!((c.efficiency - 72.4 / (200.0 * 0.402)).abs() < 1e-12);
        assert!((c.efficiency - 0.900).abs() < 1e-3);
        assert!((c.sinr_slope_db - 1.14 / 0.073).abs() < 1e-9);
        assert!((c.sinr_slope_db - 15.6).abs() < 0.05);
    }

    #[test]
    fn inconsistent_targets_reported() {
        let mut t = reference_targets();
        t.target_prb.no_agent = 0.7;
        assert!(matches!(fit_coefficients(&t), Err(Error::Config(_))));
        let mut t = reference_targets();
        t.target_thr.no_agent = 500.0;
        assert!(fit_coefficients(&t).is_err());
    }
}
