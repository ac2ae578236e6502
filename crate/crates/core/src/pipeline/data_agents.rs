//! Telemetry collection and feature preparation.

use std::collections::BTreeMap;

use crate::data::{build_windows, ingest_telemetry, rows_from_samples, AnomalyReason, Cleaner, CleanerConfig, NormStats};
use crate::error::Result;
use crate::kpi::CellId;
use crate::runtime::{Agent, AgentDescriptor, AgentMessage, MessageKind::*, TickCtx};

use super::payload::{ApprovedModelBody, ControlBody, FeaturesBody, TelemetryBody};
use super::ids::*;

/// Reads the simulator's samples for the tick and validates them.
#[derive(Debug, Clone, Default)]
pub struct DataCollector;

impl Agent for DataCollector {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(DCA, &[], &[Telemetry, Audit])
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, _inbox: Vec<AgentMessage>) -> Result<()> {
        let raw = rows_from_samples(&ctx.sim.samples_at(ctx.t));
        let ing = ingest_telemetry(&raw);
        let body = TelemetryBody { t_min: ctx.t, samples: ing.samples, records: ing.records };
        if !body.records.is_empty() {
            let note = super::payload::audit_note(
                "ingest_records",
                format!("{} ingest records at t={}", body.records.len(), ctx.t),
                serde_json::to_value(&body.records)?,
            );
            ctx.send(AEA, Audit, &note)?;
        }
        ctx.send(PFA, Telemetry, &body)?;
        ctx.send(OA, Telemetry, &body)
    }

    fn checkpoint(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

/// Cleans per-cell series and cuts feature windows once normalization
/// statistics arrive with an approved model.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    cfg: CleanerConfig,
    cleaners: BTreeMap<CellId, Cleaner>,
    norms: BTreeMap<CellId, NormStats>,
}

impl Preprocessor {
    pub fn new(cfg: CleanerConfig) -> Self {
        Preprocessor { cfg, cleaners: BTreeMap::new(), norms: BTreeMap::new() }
    }
}

impl Agent for Preprocessor {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(PFA, &[Telemetry, Model], &[Features, Control, Audit])
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        let mut body = FeaturesBody { t_min: ctx.t, samples: vec![], tags: vec![], windows: vec![] };
        for m in inbox {
            match m.kind {
                Model if m.sender.as_str() == MVA => {
                    let a: ApprovedModelBody = m.payload_as()?;
                    self.norms.insert(a.artifact.cell_id.clone(), a.artifact.norm);
                }
                Telemetry => {
                    let tb: TelemetryBody = m.payload_as()?;
                    for s in tb.samples {
                        let cfg = self.cfg;
                        let cleaner = self
                            .cleaners
                            .entry(s.cell_id.clone())
                            .or_insert_with(|| Cleaner::new(s.cell_id.clone(), cfg));
                        let (appended, tags) = cleaner.push(s)?;
                        body.samples.extend(appended);
                        body.tags.extend(tags);
                    }
                }
                _ => {}
            }
        }
        for (cell, norm) in &self.norms {
            if let Some(c) = self.cleaners.get(cell) {
                if c.last_t() == Some(ctx.t) {
                    if let Ok(w) = build_windows(c.series(), ctx.t, norm) {
                        body.windows.push(w);
                    }
                }
            }
        }
        let outliers: Vec<_> = body.tags.iter().filter(|t| t.reason == AnomalyReason::Outlier).cloned().collect();
        if !outliers.is_empty() {
            ctx.send(OA, Control, &ControlBody::Anomaly { tags: outliers })?;
        }
        if !body.tags.is_empty() {
            let note = super::payload::audit_note(
                "anomaly_tags",
                format!("{} anomaly tags at t={}", body.tags.len(), ctx.t),
                serde_json::to_value(&body.tags)?,
            );
            ctx.send(AEA, Audit, &note)?;
        }
        for to in [PA, SBA, DDA, MTA] {
            ctx.send(to, Features, &body)?;
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
