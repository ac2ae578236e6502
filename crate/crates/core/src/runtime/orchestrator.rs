//! Per-tick phase dispatch, failure recovery, and workflow triggers.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::bus::Bus;
use super::message::{AgentId, AgentMessage, MessageKind, Verification};
use super::registry::{AgentDescriptor, AgentStatus, Registry};
use crate::error::{Error, Result};
use crate::kpi::{CellId, Minute};
use crate::netsim::Simulation;

/// What an agent sees while its phase runs.
pub struct TickCtx<'a> {
    pub t: Minute,
    pub sim: &'a mut Simulation,
    me: AgentId,
    outbox: Vec<(AgentId, MessageKind, Value)>,
}

impl<'a> TickCtx<'a> {
    pub fn new(t: Minute, sim: &'a mut Simulation, me: AgentId) -> Self {
        TickCtx { t, sim, me, outbox: Vec::new() }
    }

    pub fn me(&self) -> &AgentId {
        &self.me
    }

    pub fn send<T: Serialize>(&mut self, to: &str, kind: MessageKind, payload: &T) -> Result<()> {
        let v = serde_json::to_value(payload).map_err(|e| Error::Payload(e.to_string()))?;
        self.outbox.push((AgentId::new(to), kind, v));
        Ok(())
    }

    pub fn into_outbox(self) -> Vec<(AgentId, MessageKind, Value)> {
        self.outbox
    }
}

pub trait Agent: Send {
    fn descriptor(&self) -> AgentDescriptor;

    fn id(&self) -> AgentId {
        self.descriptor().agent_id
    }

    /// Whether this phase has work given the queued messages. Messages stay
    /// queued while an agent is not ready.
    fn ready(&self, _pending: &[&AgentMessage]) -> bool {
        true
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()>;

    /// State copy used to restart the agent after a failure.
    fn checkpoint(&self) -> Box<dyn Agent>;

    fn as_any(&self) -> &dyn std::any::Any;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub agent: AgentId,
    pub at_t: Minute,
    /// Consecutive failed attempts; 3 or more exhausts the restarts.
    pub failures: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperPlan {
    pub at_t: Minute,
    pub kind: MessageKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseOutcome {
    Idle,
    Ran,
    Recovered,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub agent: AgentId,
    pub outcome: PhaseOutcome,
    pub consumed: usize,
    pub produced: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryAction {
    pub t_min: Minute,
    pub agent: AgentId,
    pub restarts: u32,
    pub recovered: bool,
    pub replayed: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedMessage {
    pub msg_id: String,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickReport {
    pub t_min: Minute,
    pub phases: Vec<PhaseReport>,
    pub routed: usize,
    pub rejected: Vec<RejectedMessage>,
    pub recoveries: Vec<RecoveryAction>,
}

impl TickReport {
    pub fn ran(&self, agent: &str) -> bool {
        self.phases
            .iter()
            .any(|p| p.agent.as_str() == agent && matches!(p.outcome, PhaseOutcome::Ran | PhaseOutcome::Recovered))
    }
}

const MAX_RESTARTS: u32 = 2;

/// Runs registered agents in phase order each tick. The Security Agent's
/// checks happen on delivery; its alerts go to `oa` and `aea`.
pub struct Orchestrator {
    registry: Registry,
    bus: Bus,
    agents: Vec<Box<dyn Agent>>,
    sa: AgentId,
    oa: AgentId,
    aea: AgentId,
    faults: Vec<FaultPlan>,
    tampers: Vec<TamperPlan>,
}

impl Orchestrator {
    pub fn new(registry: Registry, bus: Bus, sa: &str, oa: &str, aea: &str) -> Self {
        Orchestrator {
            registry,
            bus,
            agents: Vec::new(),
            sa: AgentId::new(sa),
            oa: AgentId::new(oa),
            aea: AgentId::new(aea),
            faults: Vec::new(),
            tampers: Vec::new(),
        }
    }

    /// Registers a passive agent (no phase of its own).
    pub fn register(&mut self, desc: AgentDescriptor) -> Result<()> {
        self.handshake(&desc)?;
        self.registry.register_agent(desc).map(|_| ())
    }

    /// Registers an agent and appends its phase to the tick order.
    pub fn add_phase(&mut self, agent: Box<dyn Agent>) -> Result<()> {
        self.register(agent.descriptor())?;
        self.agents.push(agent);
        Ok(())
    }

    fn handshake(&mut self, desc: &AgentDescriptor) -> Result<()> {
        let m = AgentMessage::new(
            format!("reg-{}", desc.agent_id),
            0,
            desc.agent_id.clone(),
            self.oa.clone(),
            MessageKind::Control,
            &json!({ "register": desc }),
        )?;
        let back = self.bus.announce(m)?;
        let echoed: AgentDescriptor = serde_json::from_value(back.payload["register"].clone())?;
        if &echoed != desc {
            return Err(Error::Registry(format!("handshake for {} altered in transit", desc.agent_id)));
        }
        Ok(())
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn bus_mut(&mut self) -> &mut Bus {
        &mut self.bus
    }

    pub fn agent(&self, id: &str) -> Option<&dyn Agent> {
        self.agents.iter().find(|a| a.id().as_str() == id).map(|a| a.as_ref())
    }

    pub fn agent_mut(&mut self, id: &str) -> Option<&mut Box<dyn Agent>> {
        self.agents.iter_mut().find(|a| a.id().as_str() == id)
    }

    pub fn inject_fault(&mut self, f: FaultPlan) {
        self.faults.push(f);
    }

    pub fn inject_tamper(&mut self, p: TamperPlan) {
        self.tampers.push(p);
    }

    fn injected_failure(&mut self, agent: &AgentId, t: Minute) -> bool {
        match self.faults.iter_mut().find(|f| &f.agent == agent && f.at_t == t && f.failures > 0) {
            Some(f) => {
                f.failures -= 1;
                true
            }
            None => false,
        }
    }

    fn deliver(&mut self, t: Minute, me: &AgentId, report: &mut TickReport) -> Result<Vec<AgentMessage>> {
        let mut accepted = Vec::new();
        for m in self.bus.take_for(me) {
            match self.registry.verify_message(&m) {
                Verification::Accept => {
                    self.bus.record(&m, true);
                    accepted.push(m);
                }
                Verification::Reject(reason) => {
                    self.bus.record(&m, false);
                    let alert = json!({
                        "event": "integrity_reject",
                        "msg_id": m.msg_id,
                        "sender": m.sender,
                        "recipient": m.recipient,
                        "kind": m.kind,
                        "reason": reason,
                    });
                    let sa = self.sa.clone();
                    self.bus.send(t, &sa, &self.aea.clone(), MessageKind::Audit, alert.clone())?;
                    self.bus.send(t, &sa, &self.oa.clone(), MessageKind::Control, alert)?;
                    report.rejected.push(RejectedMessage {
                        msg_id: m.msg_id.clone(),
                        sender: m.sender.clone(),
                        recipient: m.recipient.clone(),
                        reason,
                    });
                }
            }
        }
        report.routed += accepted.len();
        Ok(accepted)
    }

    /// Runs every phase once for minute `t`.
    pub fn dispatch_tick(&mut self, t: Minute, sim: &mut Simulation) -> Result<TickReport> {
        let mut report = TickReport { t_min: t, phases: vec![], routed: 0, rejected: vec![], recoveries: vec![] };
        for i in 0..self.agents.len() {
            for p in self.tampers.iter().filter(|p| p.at_t == t).cloned().collect::<Vec<_>>() {
                if self.bus.tamper(|m| m.kind == p.kind).is_some() {
                    self.tampers.retain(|q| q != &p);
                }
            }
            let id = self.agents[i].id();
            let pending: Vec<&AgentMessage> = self.bus.pending_for(&id).collect();
            if !self.agents[i].ready(&pending) {
                report.phases.push(PhaseReport { agent: id, outcome: PhaseOutcome::Idle, consumed: 0, produced: 0 });
                continue;
            }
            let inbox = self.deliver(t, &id, &mut report)?;
            let consumed = inbox.len();
            let saved = self.agents[i].checkpoint();
            let mut restarts = 0;
            let mut last_err = String::new();
            let outcome = loop {
                let attempt = if self.injected_failure(&id, t) {
                    Err(Error::Invalid(format!("injected failure of {id} at t={t}")))
                } else {
                    let mut ctx = TickCtx::new(t, sim, id.clone());
                    self.agents[i].step(&mut ctx, inbox.clone()).map(|_| ctx.into_outbox())
                };
                match attempt {
                    Ok(outbox) => {
                        let produced = outbox.len();
                        for (to, kind, payload) in outbox {
                            self.bus.send(t, &id, &to, kind, payload)?;
                        }
                        break (if restarts == 0 { PhaseOutcome::Ran } else { PhaseOutcome::Recovered }, produced);
                    }
                    Err(e) => {
                        last_err = e.to_string();
                        self.registry.set_status(&id, AgentStatus::Failed);
                        if restarts == MAX_RESTARTS {
                            break (PhaseOutcome::Degraded, 0);
                        }
                        restarts += 1;
                        self.agents[i] = saved.checkpoint();
                        self.registry.set_status(&id, AgentStatus::Restarted);
                    }
                }
            };
            if restarts > 0 {
                let recovered = outcome.0 != PhaseOutcome::Degraded;
                if !recovered {
                    // keep the messages for a later attempt
                    self.agents[i] = saved.checkpoint();
                    self.bus.requeue(inbox);
                }
                let action = RecoveryAction {
                    t_min: t,
                    agent: id.clone(),
                    restarts,
                    recovered,
                    replayed: if recovered { consumed } else { 0 },
                    error: last_err,
                };
                let event = if recovered { "recovery" } else { "degraded" };
                let mut body = serde_json::to_value(&action)?;
                body["event"] = json!(event);
                let oa = self.oa.clone();
                self.bus.send(t, &oa, &self.aea.clone(), MessageKind::Audit, body)?;
                report.recoveries.push(action);
            }
            report.phases.push(PhaseReport { agent: id, outcome: outcome.0, consumed, produced: outcome.1 });
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerCause {
    KpiDegradation,
    Anomaly,
    Scheduled,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowTrigger {
    pub trigger_id: String,
    pub cause: TriggerCause,
    pub scope: Vec<CellId>,
    pub t_min: Minute,
}

impl WorkflowTrigger {
    pub fn overlaps(&self, other: &WorkflowTrigger) -> bool {
        self.scope.iter().any(|c| other.scope.contains(c))
    }
}

/// Serializes triggers whose cell scopes overlap; disjoint ones run side by side.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerQueue {
    active: Vec<WorkflowTrigger>,
    waiting: Vec<WorkflowTrigger>,
}

impl TriggerQueue {
    /// Returns true if the trigger started immediately.
    pub fn raise(&mut self, t: WorkflowTrigger) -> bool {
        if self.active.iter().any(|a| a.overlaps(&t)) || self.waiting.iter().any(|w| w.overlaps(&t)) {
            self.waiting.push(t);
            false
        } else {
            self.active.push(t);
            true
        }
    }

    /// Finishes a trigger and returns the waiting ones that could start.
    pub fn complete(&mut self, trigger_id: &str) -> Vec<WorkflowTrigger> {
        self.active.retain(|a| a.trigger_id != trigger_id);
        let mut started = Vec::new();
        let mut still = Vec::new();
        for w in std::mem::take(&mut self.waiting) {
            let blocked = self.active.iter().any(|a| a.overlaps(&w)) || still.iter().any(|s: &WorkflowTrigger| s.overlaps(&w));
            if blocked {
                still.push(w);
            } else {
                self.active.push(w.clone());
                started.push(w);
            }
        }
        self.waiting = still;
        started
    }

    pub fn active(&self) -> &[WorkflowTrigger] {
        &self.active
    }

    pub fn waiting(&self) -> &[WorkflowTrigger] {
        &self.waiting
    }
}
