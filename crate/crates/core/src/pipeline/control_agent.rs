//! Workflow triggers, training schedule, and post-decision suppression.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::assure::DeployStatus;
use crate::error::Result;
use crate::kpi::{CellId, Minute};
use crate::runtime::{
    Agent, AgentDescriptor, AgentMessage, MessageKind::*, TickCtx, TriggerCause, TriggerQueue, WorkflowTrigger,
};

use super::ids::*;
use super::payload::{audit_note, ControlBody, TelemetryBody, VerdictBody};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    /// Models train on minutes before this one.
    pub train_until: Minute,
    pub schedule: Vec<Minute>,
    pub prb_trigger: f64,
    /// Consecutive minutes above `prb_trigger` that raise a degradation trigger.
    pub kpi_trigger_sustain: u32,
    pub trigger_on_anomaly: bool,
    /// Cell watched for overload and scheduled optimization.
    pub watch_cell: CellId,
}

#[derive(Debug, Clone)]
pub struct ControlAgent {
    cfg: ControlConfig,
    queue: TriggerQueue,
    next_id: u32,
    over_streak: u32,
    /// Cells whose last policy was refused; no further triggers this run.
    refused: BTreeSet<CellId>,
    /// Cells with a live deployment.
    deploying: BTreeSet<CellId>,
    integrity_alerts: u32,
}

impl ControlAgent {
    pub fn new(cfg: ControlConfig) -> Self {
        ControlAgent {
            cfg,
            queue: TriggerQueue::default(),
            next_id: 0,
            over_streak: 0,
            refused: BTreeSet::new(),
            deploying: BTreeSet::new(),
            integrity_alerts: 0,
        }
    }

    pub fn integrity_alerts(&self) -> u32 {
        self.integrity_alerts
    }

    fn raise(&mut self, ctx: &mut TickCtx<'_>, cause: TriggerCause, scope: Vec<CellId>) -> Result<()> {
        self.next_id += 1;
        let trigger = WorkflowTrigger {
            trigger_id: format!("trg-{:03}-t{}", self.next_id, ctx.t),
            cause,
            scope,
            t_min: ctx.t,
        };
        let blocked: Vec<&CellId> =
            trigger.scope.iter().filter(|c| self.refused.contains(*c) || self.deploying.contains(*c)).collect();
        let body = serde_json::to_value(&trigger)?;
        if !blocked.is_empty() {
            let why = format!("{} suppressed: a decision already stands for {:?}", trigger.trigger_id, blocked);
            return ctx.send(AEA, Audit, &audit_note("trigger_suppressed", why, body));
        }
        if self.queue.raise(trigger.clone()) {
            let why = format!("{} started ({:?}) for {:?}", trigger.trigger_id, cause, trigger.scope);
            ctx.send(AEA, Audit, &audit_note("trigger_started", why, body))?;
            ctx.send(PA, Control, &ControlBody::Forecast { trigger })
        } else {
            let why = format!("{} queued behind an overlapping workflow", trigger.trigger_id);
            ctx.send(AEA, Audit, &audit_note("trigger_queued", why, body))
        }
    }

    fn complete(&mut self, ctx: &mut TickCtx<'_>, trigger_id: &str) -> Result<()> {
        for trigger in self.queue.complete(trigger_id) {
            let why = format!("{} started after {trigger_id} finished", trigger.trigger_id);
            ctx.send(AEA, Audit, &audit_note("trigger_started", why, serde_json::to_value(&trigger)?))?;
            ctx.send(PA, Control, &ControlBody::Forecast { trigger })?;
        }
        Ok(())
    }

    fn scope_of(&self, trigger_id: &str) -> Vec<CellId> {
        self.queue
            .active()
            .iter()
            .find(|t| t.trigger_id == trigger_id)
            .map(|t| t.scope.clone())
            .unwrap_or_else(|| vec![self.cfg.watch_cell.clone()])
    }
}

impl Agent for ControlAgent {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(OA, &[Telemetry, Control, Verdict, DriftAlert], &[Control, Audit])
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        let mut raise = Vec::new();
        for m in inbox {
            match m.kind {
                Telemetry => {
                    let tb: TelemetryBody = m.payload_as()?;
                    if let Some(s) = tb.samples.iter().find(|s| s.cell_id == self.cfg.watch_cell) {
                        self.over_streak = if s.prb_util > self.cfg.prb_trigger { self.over_streak + 1 } else { 0 };
                        if self.over_streak == self.cfg.kpi_trigger_sustain {
                            raise.push((TriggerCause::KpiDegradation, vec![s.cell_id.clone()]));
                        }
                    }
                }
                Verdict => {
                    let v: VerdictBody = m.payload_as()?;
                    if !v.verdict.is_approved() {
                        self.refused.extend(self.scope_of(&v.trigger_id));
                    }
                }
                Control => match m.payload_as::<ControlBody>()? {
                    ControlBody::NoForecast { trigger_id, .. } | ControlBody::NoPolicy { trigger_id, .. } => {
                        self.complete(ctx, &trigger_id)?;
                    }
                    ControlBody::DeployStatus { trigger_id, status, .. } => {
                        let scope = self.scope_of(&trigger_id);
                        match status {
                            DeployStatus::Refused => {
                                self.refused.extend(scope);
                                self.complete(ctx, &trigger_id)?;
                            }
                            DeployStatus::Active => {
                                self.deploying.extend(scope);
                                self.complete(ctx, &trigger_id)?;
                            }
                            DeployStatus::Expired | DeployStatus::RolledBack => self.deploying.clear(),
                        }
                    }
                    ControlBody::Anomaly { tags } if self.cfg.trigger_on_anomaly => {
                        let cells: BTreeSet<CellId> = tags.into_iter().map(|t| t.cell_id).collect();
                        raise.push((TriggerCause::Anomaly, cells.into_iter().collect()));
                    }
                    ControlBody::IntegrityReject { .. } => self.integrity_alerts += 1,
                    _ => {}
                },
                _ => {}
            }
        }
        if ctx.t + 1 == self.cfg.train_until {
            ctx.send(MTA, Control, &ControlBody::Train { through: ctx.t })?;
            let note = audit_note("training_scheduled", format!("training on t<{}", self.cfg.train_until), json!({}));
            ctx.send(AEA, Audit, &note)?;
        }
        if self.cfg.schedule.contains(&ctx.t) {
            raise.push((TriggerCause::Scheduled, vec![self.cfg.watch_cell.clone()]));
        }
        for (cause, scope) in raise {
            self.raise(ctx, cause, scope)?;
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
