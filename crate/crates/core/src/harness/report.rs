//! Eval-window aggregates and the run report.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::kpi::{CellId, Kpi};
use crate::netsim::{EvalWindow, TelemetryLog};
use crate::pipeline::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregates {
    pub cell_id: CellId,
    pub minutes: usize,
    pub mean_rrc: f64,
    pub mean_thr: f64,
    pub mean_prb: f64,
    pub p95_prb: f64,
    pub mean_sinr: f64,
}

impl CellAggregates {
    /// `(label, value)` in table order.
    pub fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("mean rrc", self.mean_rrc),
            ("mean thr (Mbps)", self.mean_thr),
            ("mean prb", self.mean_prb),
            ("p95 prb", self.p95_prb),
            ("mean sinr (dB)", self.mean_sinr),
        ]
    }
}

/// Nearest-rank percentile of a non-empty slice.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-cell aggregates over exactly the minutes of `window`, in first-seen
/// cell order. Cells with no samples in the window are omitted.
pub fn aggregate(log: &TelemetryLog, window: EvalWindow) -> Vec<CellAggregates> {
    let mut cells: Vec<CellId> = Vec::new();
    for s in &log.samples {
        if !cells.contains(&s.cell_id) {
            cells.push(s.cell_id.clone());
        }
    }
    cells
        .into_iter()
        .filter_map(|c| {
            let rows: Vec<_> = log.for_cell(&c).filter(|s| window.contains(s.t_min)).collect();
            if rows.is_empty() {
                return None;
            }
            let col = |k: Kpi| rows.iter().map(|s| s.get(k)).collect::<Vec<f64>>();
            let prb = col(Kpi::Prb);
            Some(CellAggregates {
                cell_id: c.clone(),
                minutes: rows.len(),
                mean_rrc: mean(&col(Kpi::Rrc)),
                mean_thr: mean(&col(Kpi::Thr)),
                mean_prb: mean(&prb),
                p95_prb: percentile(&prb, 95.0),
                mean_sinr: mean(&col(Kpi::Sinr)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentSummary {
    pub policy_id: Option<String>,
    /// `approved`, `rejected`, or `retrain_requested`; absent without verification.
    pub verdict: Option<String>,
    /// Final deployment status, if anything reached the deployer.
    pub status: Option<String>,
    pub fraction: Option<f64>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    /// Digest of the effective scenario (seed included).
    pub scenario_digest: String,
    pub mode: Mode,
    pub seed: u64,
    pub eval_window: EvalWindow,
    pub target_cell: CellId,
    pub cells: Vec<CellAggregates>,
    pub deployment: DeploymentSummary,
    pub telemetry_digest: String,
    pub transcript_digest: Option<String>,
    pub audit_entries: usize,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn cell(&self, id: &CellId) -> Option<&CellAggregates> {
        self.cells.iter().find(|c| &c.cell_id == id)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let w = self.eval_window;
        let _ = writeln!(s, "# Run report: {} ({})\n", self.scenario, self.mode);
        let _ = writeln!(s, "- seed: {}", self.seed);
        let _ = writeln!(s, "- scenario digest: `{}`", self.scenario_digest);
        let _ = writeln!(s, "- telemetry digest: `{}`", self.telemetry_digest);
        if let Some(d) = &self.transcript_digest {
            let _ = writeln!(s, "- message transcript digest: `{d}`");
        }
        let _ = writeln!(s, "- audit entries: {}\n", self.audit_entries);
        let _ = writeln!(s, "## Eval window t={}..{}\n", w.start, w.end);
        let _ = writeln!(s, "| cell | mean rrc | mean thr (Mbps) | mean prb | p95 prb | mean sinr (dB) |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for c in &self.cells {
            let tag = if c.cell_id == self.target_cell { " (target)" } else { "" };
            let _ = writeln!(
                s,
                "| {}{tag} | {:.1} | {:.2} | {:.3} | {:.3} | {:.2} |",
                c.cell_id, c.mean_rrc, c.mean_thr, c.mean_prb, c.p95_prb, c.mean_sinr
            );
        }
        let d = &self.deployment;
        let _ = writeln!(s, "\n## Decision\n");
        let _ = writeln!(s, "- policy: {}", d.policy_id.as_deref().unwrap_or("none"));
        if let Some(f) = d.fraction {
            let _ = writeln!(s, "- offload fraction: {:.3}", f);
        }
        let _ = writeln!(s, "- verdict: {}", d.verdict.as_deref().unwrap_or("not verified"));
        let _ = writeln!(s, "- deployment: {}", d.status.as_deref().unwrap_or("none"));
        let _ = writeln!(s, "- rationale: {}", d.rationale);
        if !self.artifacts.is_empty() {
            let _ = writeln!(s, "\n## Artifacts\n");
            for a in &self.artifacts {
                let _ = writeln!(s, "- {}", a.display());
            }
        }
        s
    }
}
