//! Policy generation, independent simulation, verification, and deployment.

use std::collections::BTreeMap;

use serde_json::json;

use crate::assure::{
    annotate_impact, fit_local_model, generate_policy, simulate_policy, verify_policy, DeployStatus, Deployer,
    DeploymentRecord, FitConfig, GuardrailConfig, LocalBaselineModel,
};
use crate::error::{Error, Result};
use crate::kpi::{CellId, Kpi, KpiSample};
use crate::netsim::CellConfig;
use crate::runtime::{Agent, AgentDescriptor, AgentMessage, MessageKind::*, TickCtx};

use super::ids::*;
use super::payload::{
    audit_note, BaselineBody, ControlBody, DeployBody, FeaturesBody, ForecastBody, ForecastRole, PolicyBody,
    VerdictBody,
};

fn cell<'a>(cells: &'a [CellConfig], id: &CellId) -> Result<&'a CellConfig> {
    cells
        .iter()
        .find(|c| &c.cell_id == id)
        .ok_or_else(|| Error::Invalid(format!("unknown cell {id}")))
}

/// Turns the triggered cell's forecast into an offload policy. With
/// `verify` off the policy goes straight to the deployer.
#[derive(Debug, Clone)]
pub struct PolicyGenerator {
    cfg: GuardrailConfig,
    cells: Vec<CellConfig>,
    verify: bool,
}

impl PolicyGenerator {
    pub fn new(cfg: GuardrailConfig, cells: Vec<CellConfig>, verify: bool) -> Self {
        PolicyGenerator { cfg, cells, verify }
    }
}

impl Agent for PolicyGenerator {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(PGA, &[Forecast], &[Policy, DeployCmd, Control, Audit])
    }

    fn ready(&self, pending: &[&AgentMessage]) -> bool {
        pending.iter().any(|m| m.kind == Forecast)
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        let mut by_trigger: BTreeMap<String, Vec<ForecastBody>> = BTreeMap::new();
        for m in inbox.iter().filter(|m| m.kind == Forecast) {
            let f: ForecastBody = m.payload_as()?;
            by_trigger.entry(f.trigger_id.clone()).or_default().push(f);
        }
        for (trigger_id, fs) in by_trigger {
            let Some(src) = fs.iter().find(|f| f.role == ForecastRole::Source) else { continue };
            let Some(nb) = fs.iter().find(|f| f.role == ForecastRole::Neighbor) else { continue };
            let src_cfg = cell(&self.cells, &src.forecast.cell_id)?;
            let nb_cfg = cell(&self.cells, &nb.forecast.cell_id)?;
            let nominal = src_cfg.params.nominal_rrc;
            let Some(mut policy) = generate_policy(&src.forecast, &nb_cfg.cell_id, &self.cfg, nominal) else {
                let reason = format!(
                    "forecast peak PRB {:.3} and RRC {:.1} stay under the triggers",
                    src.forecast.max_of(Kpi::Prb),
                    src.forecast.max_of(Kpi::Rrc)
                );
                ctx.send(OA, Control, &ControlBody::NoPolicy { trigger_id, reason })?;
                continue;
            };
            annotate_impact(&mut policy, &src_cfg.params, &nb_cfg.params);
            let note = audit_note(
                "policy_generated",
                format!(
                    "{}: offload {:.1}% of excess users from {} to {} (forecast peak PRB {:.3}, RRC {:.1})",
                    policy.policy_id,
                    policy.directive.fraction * 100.0,
                    policy.directive.source_cell,
                    policy.directive.target_cell,
                    policy.max_prb,
                    policy.max_rrc
                ),
                serde_json::to_value(&policy)?,
            );
            ctx.send(AEA, Audit, &note)?;
            if self.verify {
                ctx.send(SBA, Policy, &PolicyBody { trigger_id, policy })?;
            } else {
                ctx.send(DA, DeployCmd, &DeployBody { trigger_id, policy, verdict: None })?;
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

/// Fits local per-cell lines to recent telemetry and replays a policy on them.
#[derive(Debug, Clone)]
pub struct BaselineSimulator {
    fit: FitConfig,
    cells: Vec<CellConfig>,
    recent: Vec<KpiSample>,
}

impl BaselineSimulator {
    pub fn new(fit: FitConfig, cells: Vec<CellConfig>) -> Self {
        BaselineSimulator { fit, cells, recent: Vec::new() }
    }
}

impl Agent for BaselineSimulator {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(SBA, &[Features, Policy], &[Baseline, Control, Audit])
    }

    fn ready(&self, pending: &[&AgentMessage]) -> bool {
        pending.iter().any(|m| m.kind == Policy)
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        let mut policies = Vec::new();
        for m in inbox {
            match m.kind {
                Features => {
                    let f: FeaturesBody = m.payload_as()?;
                    self.recent.extend(f.samples);
                }
                Policy => policies.push(m.payload_as::<PolicyBody>()?),
                _ => {}
            }
        }
        let keep = self.fit.window * self.cells.len();
        if self.recent.len() > keep {
            self.recent.drain(..self.recent.len() - keep);
        }
        for PolicyBody { trigger_id, policy } in policies {
            let fitted: Result<Vec<LocalBaselineModel>> = self
                .cells
                .iter()
                .map(|c| fit_local_model(&self.recent, &c.cell_id, &c.params, &self.fit))
                .collect();
            let src = cell(&self.cells, &policy.directive.source_cell)?;
            let sim = fitted.and_then(|models| {
                simulate_policy(&policy, &models, &self.recent, src.params.nominal_rrc).map(|s| (models, s))
            });
            match sim {
                Ok((models, trajectories)) => {
                    let body = BaselineBody { trigger_id, policy, models, trajectories };
                    ctx.send(VA, Baseline, &body)?;
                }
                Err(e) => {
                    let reason = format!("independent simulation failed: {e}");
                    ctx.send(AEA, Audit, &audit_note("baseline_failed", reason.clone(), json!({})))?;
                    ctx.send(OA, Control, &ControlBody::NoPolicy { trigger_id, reason })?;
                }
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

/// Judges a policy on the independent simulation and hands the verdict on.
#[derive(Debug, Clone)]
pub struct Verifier {
    cfg: GuardrailConfig,
    forecasts: BTreeMap<String, Vec<ForecastBody>>,
}

impl Verifier {
    pub fn new(cfg: GuardrailConfig) -> Self {
        Verifier { cfg, forecasts: BTreeMap::new() }
    }
}

impl Agent for Verifier {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(VA, &[Forecast, Baseline], &[Verdict, DeployCmd, Audit])
    }

    fn ready(&self, pending: &[&AgentMessage]) -> bool {
        pending.iter().any(|m| m.kind == Baseline)
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        let mut baselines = Vec::new();
        for m in inbox {
            match m.kind {
                Forecast => {
                    let f: ForecastBody = m.payload_as()?;
                    self.forecasts.entry(f.trigger_id.clone()).or_default().push(f);
                }
                Baseline => baselines.push(m.payload_as::<BaselineBody>()?),
                _ => {}
            }
        }
        for b in baselines {
            let neighbor = &b.policy.directive.target_cell;
            let shift = b.policy.impact(neighbor, Kpi::Prb);
            let predicted: Vec<f64> = self
                .forecasts
                .remove(&b.trigger_id)
                .unwrap_or_default()
                .iter()
                .find(|f| &f.forecast.cell_id == neighbor)
                .map(|f| f.forecast.series(Kpi::Prb).into_iter().map(|p| p + shift).collect())
                .unwrap_or_default();
            let verdict = verify_policy(&b.policy, &predicted, &b.trajectories, &self.cfg);
            let body = VerdictBody { trigger_id: b.trigger_id.clone(), verdict: verdict.clone() };
            for to in [AEA, OA, DDA] {
                ctx.send(to, Verdict, &body)?;
            }
            let cmd = DeployBody { trigger_id: b.trigger_id, policy: b.policy, verdict: Some(verdict) };
            ctx.send(DA, DeployCmd, &cmd)?;
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

/// Installs directives, watches live ones, and rolls back on degradation.
#[derive(Debug, Clone)]
pub struct DeployAgent {
    cfg: GuardrailConfig,
    deployer: Deployer,
    /// Trigger that produced the live deployment.
    trigger: Option<String>,
    records: Vec<DeploymentRecord>,
}

impl DeployAgent {
    pub fn new(cfg: GuardrailConfig, watch_cell: CellId) -> Self {
        DeployAgent { cfg, deployer: Deployer::new(watch_cell), trigger: None, records: Vec::new() }
    }

    pub fn records(&self) -> &[DeploymentRecord] {
        &self.records
    }

    fn report(&mut self, ctx: &mut TickCtx<'_>, trigger_id: String, rec: DeploymentRecord) -> Result<()> {
        let event = match rec.status {
            DeployStatus::Refused => "deployment_refused",
            DeployStatus::Active => "deployment_active",
            DeployStatus::Expired => "deployment_expired",
            DeployStatus::RolledBack => "deployment_rolled_back",
        };
        let note = audit_note(event, format!("{}: {}", rec.policy_id, rec.reason), serde_json::to_value(&rec)?);
        ctx.send(AEA, Audit, &note)?;
        let status = ControlBody::DeployStatus {
            trigger_id,
            policy_id: rec.policy_id.clone(),
            status: rec.status,
            reason: rec.reason.clone(),
        };
        ctx.send(OA, Control, &status)?;
        self.records.push(rec);
        Ok(())
    }
}

impl Agent for DeployAgent {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(DA, &[DeployCmd], &[Control, Audit])
    }

    fn ready(&self, pending: &[&AgentMessage]) -> bool {
        self.deployer.active().is_some() || pending.iter().any(|m| m.kind == DeployCmd)
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        if let Some(rec) = self.deployer.monitor(ctx.sim, ctx.t, &self.cfg)? {
            let trig = self.trigger.take().unwrap_or_default();
            self.report(ctx, trig, rec)?;
        }
        for m in inbox.iter().filter(|m| m.kind == DeployCmd) {
            let cmd: DeployBody = m.payload_as()?;
            let res = match &cmd.verdict {
                Some(v) => self.deployer.deploy_policy(&cmd.policy, v, ctx.sim, ctx.t),
                None => self.deployer.deploy_unverified(&cmd.policy, ctx.sim, ctx.t),
            };
            match res {
                Ok(rec) => {
                    if rec.status == DeployStatus::Active {
                        self.trigger = Some(cmd.trigger_id.clone());
                    }
                    self.report(ctx, cmd.trigger_id, rec)?;
                }
                Err(e) => {
                    let note = audit_note("deployment_error", e.to_string(), json!({ "policy_id": cmd.policy.policy_id }));
                    ctx.send(AEA, Audit, &note)?;
                    let ctl = ControlBody::NoPolicy { trigger_id: cmd.trigger_id, reason: e.to_string() };
                    ctx.send(OA, Control, &ctl)?;
                }
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
