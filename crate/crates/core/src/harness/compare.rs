//! The `compare` command.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{aggregate, CellAggregates, RunReport};
use super::run::write_overlays;
use crate::error::{Error, Result};
use crate::kpi::CellId;
use crate::netsim::TelemetryLog;

pub struct LoadedRun {
    pub dir: PathBuf,
    pub report: RunReport,
    pub log: TelemetryLog,
    /// Recomputed from the run's telemetry.csv.
    pub cells: Vec<CellAggregates>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let report: RunReport = serde_json::from_str(&fs::read_to_string(dir.join("run.json"))?)?;
    let log = TelemetryLog::read_csv(&dir.join("telemetry.csv"))?;
    let cells = aggregate(&log, report.eval_window);
    Ok(LoadedRun { dir: dir.to_path_buf(), report, log, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub cell_id: CellId,
    pub metric: String,
    pub values: Vec<f64>,
    /// Percent change of each run against the first; `None` when undefined.
    pub deltas_pct: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub markdown: String,
    pub artifacts: Vec<PathBuf>,
}

impl Comparison {
    pub fn row(&self, cell: &CellId, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| &r.cell_id == cell && r.metric == metric)
    }
}

pub fn pct_delta(reference: f64, value: f64) -> Option<f64> {
    if reference == value {
        Some(0.0)
    } else if reference == 0.0 {
        None
    } else {
        Some((value - reference) / reference.abs() * 100.0)
    }
}

/// Tabulates eval-window aggregates of runs over the same scenario; the
/// first run is the reference. With `out`, also writes `compare.md` and
/// combined charts there.
pub fn cmd_compare(dirs: &[PathBuf], out: Option<&Path>) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(Error::Invalid("compare needs at least two run directories".into()));
    }
    let runs: Vec<LoadedRun> = dirs.iter().map(|d| load_run(d)).collect::<Result<_>>()?;
    let first = &runs[0].report;
    for r in &runs[1..] {
        if r.report.scenario_digest != first.scenario_digest {
            return Err(Error::Invalid(format!(
                "mismatched scenarios: {} ({}) vs {} ({})",
                runs[0].dir.display(),
                first.scenario,
                r.dir.display(),
                r.report.scenario
            )));
        }
    }
    let labels: Vec<String> = runs
        .iter()
        .map(|r| {
            let name = r.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            format!("{} ({})", name, r.report.mode)
        })
        .collect();

    let mut rows = Vec::new();
    for reference in &runs[0].cells {
        let per_run: Vec<Option<&CellAggregates>> =
            runs.iter().map(|r| r.cells.iter().find(|c| c.cell_id == reference.cell_id)).collect();
        for (i, (metric, ref_value)) in reference.fields().into_iter().enumerate() {
            let values: Vec<f64> = per_run.iter().map(|c| c.map_or(f64::NAN, |c| c.fields()[i].1)).collect();
            let deltas_pct = values.iter().map(|&v| pct_delta(ref_value, v)).collect();
            rows.push(ComparisonRow { cell_id: reference.cell_id.clone(), metric: metric.into(), values, deltas_pct });
        }
    }

    let mut md = String::new();
    let w = first.eval_window;
    let _ = writeln!(md, "# Comparison: {} (eval window t={}..{})\n", first.scenario, w.start, w.end);
    let _ = write!(md, "| cell | metric |");
    for (i, l) in labels.iter().enumerate() {
        let _ = if i == 0 { write!(md, " {l} |") } else { write!(md, " {l} | Δ% |") };
    }
    let _ = write!(md, "\n|---|---|");
    for i in 0..labels.len() {
        md.push_str(if i == 0 { "---|" } else { "---|---|" });
    }
    md.push('\n');
    for r in &rows {
        let _ = write!(md, "| {} | {} |", r.cell_id, r.metric);
        for (i, v) in r.values.iter().enumerate() {
            let _ = write!(md, " {v:.3} |");
            if i > 0 {
                let _ = match r.deltas_pct[i] {
                    Some(d) => write!(md, " {d:+.1}% |"),
                    None => write!(md, " n/a |"),
                };
            }
        }
        md.push('\n');
    }

    let mut artifacts = Vec::new();
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(out.join("compare.md"), &md)?;
        artifacts.push(PathBuf::from("compare.md"));
        let target = first.target_cell.clone();
        let neighbor = runs[0]
            .cells
            .iter()
            .map(|c| c.cell_id.clone())
            .find(|c| *c != target)
            .unwrap_or_else(|| target.clone());
        let traces: Vec<(String, &TelemetryLog)> = labels.iter().cloned().zip(runs.iter().map(|r| &r.log)).collect();
        artifacts.extend(write_overlays(out, [&target, &neighbor], w, &traces, "compare_")?);
    }
    Ok(Comparison { labels, rows, markdown: md, artifacts })
}
