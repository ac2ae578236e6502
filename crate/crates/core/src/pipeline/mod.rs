//! The thirteen-agent closed loop wired onto the runtime, driven from the
//! simulator's per-minute hook.

mod assure_agents;
mod control_agent;
mod data_agents;
mod learn_agents;
mod monitor_agents;
pub mod payload;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use assure_agents::{BaselineSimulator, DeployAgent, PolicyGenerator, Verifier};
pub use control_agent::{ControlAgent, ControlConfig};
pub use data_agents::{DataCollector, Preprocessor};
pub use learn_agents::{Predictor, Trainer, Validator};
pub use monitor_agents::{AuditAgent, DriftConfig, DriftDetector};

use crate::assure::{AuditLog, DeploymentRecord, DriftReport, FitConfig, GuardrailConfig};
use crate::data::CleanerConfig;
use crate::error::{Error, Result};
use crate::kpi::{KpiSample, Minute};
use crate::learn::{tune_and_train, TrainConfig, TrainOutput, TuningGrid, ValidatorConfig};
use crate::netsim::{Controller, ScenarioConfig, Simulation};
use crate::runtime::{
    run_key, AgentDescriptor, Bus, FaultPlan, MessageKind, Orchestrator, Registry, TamperPlan, TickReport,
    Transport,
};

/// Agent ids.
pub mod ids {
    pub const OA: &str = "OA";
    pub const SA: &str = "SA";
    pub const DCA: &str = "DCA";
    pub const PFA: &str = "PFA";
    pub const MTA: &str = "MTA";
    pub const MVA: &str = "MVA";
    pub const PA: &str = "PA";
    pub const PGA: &str = "PGA";
    pub const SBA: &str = "SBA";
    pub const VA: &str = "VA";
    pub const DA: &str = "DA";
    pub const DDA: &str = "DDA";
    pub const AEA: &str = "AEA";

    /// Phase order within a tick.
    pub const PHASES: [&str; 12] = [DCA, PFA, OA, MTA, MVA, PA, PGA, SBA, VA, DA, DDA, AEA];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Simulator only.
    Baseline,
    /// Generated policies deploy without verification.
    NoAgent,
    /// Full loop with independent verification.
    Agentic,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::NoAgent, Mode::Agentic];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::NoAgent => "no_agent",
            Mode::Agentic => "agentic",
        }
    }

    /// Accepts `no-agent` and `no_agent`.
    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s.replace('-', "_"))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub train_until: Minute,
    /// Minutes with a scheduled optimization trigger.
    pub schedule: Vec<Minute>,
    pub kpi_trigger_sustain: u32,
    pub trigger_on_anomaly: bool,
    pub guardrails: GuardrailConfig,
    pub train: TrainConfig,
    pub grid: TuningGrid,
    pub validator: ValidatorConfig,
    pub fit: FitConfig,
    pub cleaner: CleanerConfig,
    pub drift: DriftConfig,
    pub faults: Vec<FaultPlan>,
    pub tampers: Vec<TamperPlan>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train_until: 100,
            schedule: vec![139],
            kpi_trigger_sustain: 5,
            trigger_on_anomaly: false,
            guardrails: GuardrailConfig::default(),
            train: TrainConfig::default(),
            grid: TuningGrid::default(),
            validator: ValidatorConfig::default(),
            fit: FitConfig::default(),
            cleaner: CleanerConfig::default(),
            drift: DriftConfig::default(),
            faults: vec![],
            tampers: vec![],
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.guardrails.validate()?;
        if self.train_until == 0 {
            return Err(Error::Config("train_until must be positive".into()));
        }
        Ok(())
    }
}

/// Memo of tuned training runs keyed by data and configuration. Training is
/// deterministic, so runs that see the same pre-surge data share the result.
#[derive(Clone, Default)]
pub struct TrainingCache {
    inner: Arc<Mutex<HashMap<String, TrainOutput>>>,
}

impl TrainingCache {
    fn key(series: &[KpiSample], cfg: &TrainConfig, grid: &TuningGrid) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(series)?);
        h.update(serde_json::to_vec(cfg)?);
        h.update(serde_json::to_vec(grid)?);
        Ok(hex::encode(h.finalize()))
    }

    pub fn get_or_train(&self, series: &[KpiSample], cfg: &TrainConfig, grid: &TuningGrid) -> Result<TrainOutput> {
        let key = Self::key(series, cfg, grid)?;
        if let Some(hit) = self.inner.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let out = tune_and_train(series, cfg, grid)?;
        self.inner.lock().expect("cache lock").insert(key, out.clone());
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Agent loop attached to a simulation as its per-minute controller.
pub struct AgentPipeline {
    mode: Mode,
    orch: Orchestrator,
    reports: Vec<TickReport>,
}

impl AgentPipeline {
    /// Wires all thirteen agents. `mode` must not be [`Mode::Baseline`].
    pub fn new(
        scenario: &ScenarioConfig,
        cfg: &PipelineConfig,
        mode: Mode,
        cache: TrainingCache,
        transport: Option<Box<dyn Transport>>,
    ) -> Result<Self> {
        use ids::*;
        use MessageKind::*;
        if mode == Mode::Baseline {
            return Err(Error::Config("baseline mode runs without agents".into()));
        }
        cfg.validate()?;
        let key = run_key(scenario.seed);
        let bus = match transport {
            Some(t) => Bus::with_transport(key.clone(), t),
            None => Bus::new(key.clone()),
        };
        let mut orch = Orchestrator::new(Registry::new(key), bus, SA, OA, AEA);
        orch.register(AgentDescriptor::new(SA, &[], &[Audit, Control]))?;

        let cells = scenario.cells.clone();
        let cell_ids = cells.iter().map(|c| c.cell_id.clone()).collect();
        let g = cfg.guardrails;
        let control = ControlConfig {
            train_until: cfg.train_until,
            schedule: cfg.schedule.clone(),
            prb_trigger: g.prb_trigger,
            kpi_trigger_sustain: cfg.kpi_trigger_sustain,
            trigger_on_anomaly: cfg.trigger_on_anomaly,
            watch_cell: scenario.target_cell.clone(),
        };
        orch.add_phase(Box::new(DataCollector))?;
        orch.add_phase(Box::new(Preprocessor::new(cfg.cleaner)))?;
        orch.add_phase(Box::new(ControlAgent::new(control)))?;
        let trainer = Trainer::new(cfg.train.clone(), cfg.grid.clone(), cfg.drift.retrain_min_minutes, cache);
        orch.add_phase(Box::new(trainer))?;
        orch.add_phase(Box::new(Validator::new(cfg.validator)))?;
        orch.add_phase(Box::new(Predictor::new(cell_ids)))?;
        orch.add_phase(Box::new(PolicyGenerator::new(g, cells.clone(), mode == Mode::Agentic)))?;
        orch.add_phase(Box::new(BaselineSimulator::new(cfg.fit, cells)))?;
        orch.add_phase(Box::new(Verifier::new(g)))?;
        orch.add_phase(Box::new(DeployAgent::new(g, scenario.target_cell.clone())))?;
        orch.add_phase(Box::new(DriftDetector::new(cfg.drift)))?;
        orch.add_phase(Box::new(AuditAgent::default()))?;

        for f in &cfg.faults {
            orch.inject_fault(f.clone());
        }
        for p in &cfg.tampers {
            orch.inject_tamper(p.clone());
        }
        let mut pipe = AgentPipeline { mode, orch, reports: Vec::new() };
        pipe.audit_routing()?;
        Ok(pipe)
    }

    fn audit_routing(&mut self) -> Result<()> {
        let alerts = self.orch.registry().routing_alerts();
        for a in alerts {
            let note = payload::audit_note("routing_alert", a, Value::Null);
            self.orch.bus_mut().send(0, &ids::OA.into(), &ids::AEA.into(), MessageKind::Audit, note)?;
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.orch
    }

    pub fn orchestrator_mut(&mut self) -> &mut Orchestrator {
        &mut self.orch
    }

    pub fn tick_reports(&self) -> &[TickReport] {
        &self.reports
    }

    fn agent<T: 'static>(&self, id: &str) -> Option<&T> {
        self.orch.agent(id).and_then(|a| a.as_any().downcast_ref::<T>())
    }

    pub fn audit_log(&self) -> &AuditLog {
        self.agent::<AuditAgent>(ids::AEA).expect("audit agent registered").log()
    }

    pub fn decisions(&self) -> &[Value] {
        self.agent::<AuditAgent>(ids::AEA).expect("audit agent registered").decisions()
    }

    pub fn deployments(&self) -> &[DeploymentRecord] {
        self.agent::<DeployAgent>(ids::DA).expect("deploy agent registered").records()
    }

    pub fn drift_reports(&self) -> &[DriftReport] {
        self.agent::<DriftDetector>(ids::DDA).expect("drift agent registered").reports()
    }

    pub fn transcript_digest(&self) -> String {
        self.orch.bus().transcript_digest()
    }
}

impl Controller for AgentPipeline {
    fn after_tick(&mut self, t: Minute, sim: &mut Simulation) -> Result<()> {
        let r = self.orch.dispatch_tick(t, sim)?;
        self.reports.push(r);
        Ok(())
    }
}
