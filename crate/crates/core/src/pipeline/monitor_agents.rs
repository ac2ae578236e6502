//! Drift detection and the audit trail.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::assure::{
    assess_drift, cusum_step, ks_two_sample, AuditLog, CusumState, DriftAction, DriftMethod, DriftReport, Severity,
};
use crate::data::{build_windows, WINDOW_LEN};
use crate::error::Result;
use crate::kpi::{CellId, Kpi, KpiSample, Minute};
use crate::learn::ModelArtifact;
use crate::runtime::{Agent, AgentDescriptor, AgentMessage, MessageKind::*, TickCtx};

use super::ids::*;
use super::payload::{audit_note, ApprovedModelBody, DriftBody, FeaturesBody, VerdictBody};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    /// Length of each of the two KS samples.
    pub ks_window: usize,
    pub ks_alpha: f64,
    pub cusum_k: f64,
    pub cusum_h: f64,
    pub cusum_kpi: Kpi,
    /// Residual sds below this are raised to it before standardizing.
    pub residual_sd_floor: f64,
    /// Post-change minutes collected before a requested retrain runs.
    pub retrain_min_minutes: Minute,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            ks_window: 30,
            ks_alpha: 0.05,
            cusum_k: 0.5,
            cusum_h: 5.0,
            cusum_kpi: Kpi::Prb,
            residual_sd_floor: 1e-3,
            retrain_min_minutes: 60,
        }
    }
}

/// Runs KS on adjacent windows of every KPI and CUSUM on one-step model
/// residuals, per cell, every tick.
#[derive(Debug, Clone)]
pub struct DriftDetector {
    cfg: DriftConfig,
    history: BTreeMap<CellId, Vec<KpiSample>>,
    models: BTreeMap<CellId, ModelArtifact>,
    cusum: BTreeMap<CellId, CusumState>,
    last_severity: BTreeMap<(CellId, Kpi), Severity>,
    retrain_sent: BTreeSet<CellId>,
    reports: Vec<DriftReport>,
}

impl DriftDetector {
    pub fn new(cfg: DriftConfig) -> Self {
        DriftDetector {
            cfg,
            history: BTreeMap::new(),
            models: BTreeMap::new(),
            cusum: BTreeMap::new(),
            last_severity: BTreeMap::new(),
            retrain_sent: BTreeSet::new(),
            reports: Vec::new(),
        }
    }

    /// Every report raised so far, in order.
    pub fn reports(&self) -> &[DriftReport] {
        &self.reports
    }

    fn ks_reports(&mut self, cell: &CellId, t: Minute) -> Result<Vec<DriftReport>> {
        let w = self.cfg.ks_window;
        let hist = &self.history[cell];
        if hist.len() < 2 * w {
            return Ok(vec![]);
        }
        let tail = &hist[hist.len() - 2 * w..];
        let (a, b) = tail.split_at(w);
        let mut out = Vec::new();
        for kpi in Kpi::ALL {
            let xa: Vec<f64> = a.iter().map(|s| s.get(kpi)).collect();
            let xb: Vec<f64> = b.iter().map(|s| s.get(kpi)).collect();
            let ks = ks_two_sample(&xa, &xb, self.cfg.ks_alpha)?;
            let key = (cell.clone(), kpi);
            let prev = self.last_severity.insert(key, ks.severity).unwrap_or(Severity::None);
            if ks.severity > prev {
                out.push(DriftReport {
                    method: DriftMethod::Ks,
                    kpi,
                    cell_id: cell.clone(),
                    statistic: ks.statistic,
                    threshold: ks.threshold,
                    severity: ks.severity,
                    window_a: (a[0].t_min, a[w - 1].t_min),
                    window_b: (b[0].t_min, t),
                });
            }
        }
        Ok(out)
    }

    fn cusum_report(&mut self, cell: &CellId, t: Minute) -> Result<Option<DriftReport>> {
        let Some(model) = self.models.get(cell) else { return Ok(None) };
        let hist = &self.history[cell];
        if hist.len() <= WINDOW_LEN || t == 0 {
            return Ok(None);
        }
        let window = match build_windows(&hist[..hist.len() - 1], t - 1, &model.norm) {
            Ok(w) => w,
            Err(_) => return Ok(None),
        };
        let kpi = self.cfg.cusum_kpi;
        let i = kpi.index();
        let predicted = model.one_step(&window)[i];
        let actual = hist[hist.len() - 1].get(kpi);
        let sd = model.metrics.residual_sd[i].max(self.cfg.residual_sd_floor);
        let z = (actual - predicted) / sd;
        let state = self.cusum.get(cell).copied().unwrap_or_default();
        let sum = (state.s_pos + z - self.cfg.cusum_k).max(0.0);
        let (next, alarm) = cusum_step(state, z, self.cfg.cusum_k, self.cfg.cusum_h)?;
        self.cusum.insert(cell.clone(), next);
        Ok(alarm.then(|| DriftReport {
            method: DriftMethod::Cusum,
            kpi,
            cell_id: cell.clone(),
            statistic: sum,
            threshold: self.cfg.cusum_h,
            severity: Severity::Severe,
            window_a: (t - state.run, t),
            window_b: (t - state.run, t),
        }))
    }
}

impl Agent for DriftDetector {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(DDA, &[Features, Model, Verdict], &[DriftAlert, Audit])
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        for m in inbox {
            match m.kind {
                Model if m.sender.as_str() == MVA => {
                    let a: ApprovedModelBody = m.payload_as()?;
                    let cell = a.artifact.cell_id.clone();
                    self.cusum.remove(&cell);
                    self.retrain_sent.remove(&cell);
                    self.models.insert(cell, a.artifact);
                }
                Features => {
                    let f: FeaturesBody = m.payload_as()?;
                    for s in f.samples {
                        self.history.entry(s.cell_id.clone()).or_default().push(s);
                    }
                }
                Verdict => {
                    let v: VerdictBody = m.payload_as()?;
                    if !v.verdict.is_approved() || v.verdict.retrain_requested {
                        let note = audit_note(
                            "drift_analysis",
                            format!(
                                "verifier flagged {} (divergence {:.4}); drift state reviewed",
                                v.verdict.policy_id, v.verdict.divergence
                            ),
                            json!({ "cusum": self.cusum, "flagged": self.last_severity.iter()
                                .filter(|(_, s)| **s != Severity::None)
                                .map(|((c, k), s)| json!({ "cell_id": c, "kpi": k, "severity": s }))
                                .collect::<Vec<_>>() }),
                        );
                        ctx.send(AEA, Audit, &note)?;
                    }
                }
                _ => {}
            }
        }
        let cells: Vec<CellId> = self.history.keys().cloned().collect();
        for cell in cells {
            if self.history[&cell].last().map(|s| s.t_min) != Some(ctx.t) {
                continue;
            }
            let mut reports = self.ks_reports(&cell, ctx.t)?;
            reports.extend(self.cusum_report(&cell, ctx.t)?);
            if reports.is_empty() {
                continue;
            }
            self.reports.extend(reports.iter().cloned());
            let decision = assess_drift(&reports);
            let body = DriftBody { cell_id: cell.clone(), t_min: ctx.t, decision, retrain: false };
            ctx.send(AEA, DriftAlert, &body)?;
            ctx.send(OA, DriftAlert, &body)?;
            if body.decision.action == DriftAction::Retrain && self.retrain_sent.insert(cell) {
                ctx.send(MTA, DriftAlert, &DriftBody { retrain: true, ..body })?;
            }
        }
        Ok(())
    }

    fn checkpoint(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

/// Appends everything it hears to the hash chain and keeps the decision log.
#[derive(Debug, Clone, Default)]
pub struct AuditAgent {
    log: AuditLog,
    decisions: Vec<Value>,
}

impl AuditAgent {
    pub fn log(&self) -> &AuditLog {
        &self.log
    }

    /// One object per routed verdict or drift alert.
    pub fn decisions(&self) -> &[Value] {
        &self.decisions
    }
}

impl Agent for AuditAgent {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(AEA, &[Audit, Verdict, DriftAlert], &[])
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        for m in inbox {
            let actor = m.sender.as_str();
            match m.kind {
                Audit => {
                    let event = m.payload["event"].as_str().unwrap_or("note").to_string();
                    if matches!(event.as_str(), "recovery" | "degraded") && m.payload["agent"] == json!(AEA) {
                        self.log.append(
                            ctx.t,
                            AEA,
                            "gap_marker",
                            format!("audit agent restarted at t={}; entries may be missing", m.payload["t_min"]),
                            json!({ "recovery_msg": m.msg_id }),
                        );
                    }
                    let p = &m.payload;
                    let rationale = if matches!(event.as_str(), "recovery" | "degraded") {
                        format!(
                            "{} {} at t={} after {} restart(s): {}",
                            p["agent"].as_str().unwrap_or("?"),
                            if event == "recovery" { "recovered" } else { "degraded, phase skipped" },
                            p["t_min"],
                            p["restarts"],
                            p["error"].as_str().unwrap_or("")
                        )
                    } else {
                        match p["rationale"].as_str() {
                        Some(r) => r.to_string(),
                            None => match p["reason"].as_str() {
                                Some(r) => format!("{event}: {r}"),
                                None => event.clone(),
                            },
                        }
                    };
                    self.log.append(m.t_min, actor, &event, rationale, m.payload);
                }
                Verdict => {
                    let v: VerdictBody = m.payload_as()?;
                    self.decisions.push(json!({
                        "type": "verdict",
                        "t_min": m.t_min,
                        "msg_id": m.msg_id,
                        "trigger_id": v.trigger_id,
                        "verdict": v.verdict,
                    }));
                    self.log.append(m.t_min, actor, "verdict", v.verdict.rationale.clone(), m.payload);
                }
                DriftAlert => {
                    let d: DriftBody = m.payload_as()?;
                    let worst = d.decision.evidence.first();
                    let rationale = match worst {
                        Some(r) => format!(
                            "{:?} drift on {} {}: statistic {:.3} vs threshold {:.3} ({:?}), action {:?}",
                            r.method, d.cell_id, r.kpi, r.statistic, r.threshold, r.severity, d.decision.action
                        ),
                        None => format!("drift alert for {}", d.cell_id),
                    };
                    self.decisions.push(json!({
                        "type": "drift_alert",
                        "t_min": m.t_min,
                        "msg_id": m.msg_id,
                        "cell_id": d.cell_id,
                        "decision": d.decision,
                        "rationale": rationale,
                    }));
                    self.log.append(m.t_min, actor, "drift_alert", rationale, m.payload);
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn checkpoint(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}
