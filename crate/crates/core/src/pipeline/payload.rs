//! JSON bodies carried by pipeline messages.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assure::{DeployStatus, DriftDecision, LocalBaselineModel, Policy, SimulatedTrajectories, Verdict};
use crate::data::{AnomalyTag, FeatureWindow, IngestRecord};
use crate::kpi::{CellId, KpiSample, Minute};
use crate::learn::{Example, ForecastSet, ModelArtifact};
use crate::runtime::{AgentId, MessageKind, WorkflowTrigger};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryBody {
    pub t_min: Minute,
    pub samples: Vec<KpiSample>,
    pub records: Vec<IngestRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesBody {
    pub t_min: Minute,
    /// Cleaned samples appended this tick, fills included.
    pub samples: Vec<KpiSample>,
    pub tags: Vec<AnomalyTag>,
    /// Windows ending at `t_min`, one per cell with known normalization.
    pub windows: Vec<FeatureWindow>,
}

/// Candidate from the trainer; the validator decides whether it ships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateBody {
    pub artifact: ModelArtifact,
    pub validation: Vec<Example>,
    pub holdout: Vec<Example>,
    pub retrain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovedModelBody {
    pub artifact: ModelArtifact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastRole {
    Source,
    Neighbor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBody {
    pub trigger_id: String,
    pub role: ForecastRole,
    pub forecast: ForecastSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBody {
    pub trigger_id: String,
    pub policy: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineBody {
    pub trigger_id: String,
    pub policy: Policy,
    pub models: Vec<LocalBaselineModel>,
    pub trajectories: SimulatedTrajectories,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictBody {
    pub trigger_id: String,
    pub verdict: Verdict,
}

/// Without a verdict the deployer installs the policy unchecked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployBody {
    pub trigger_id: String,
    pub policy: Policy,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBody {
    pub cell_id: CellId,
    pub t_min: Minute,
    pub decision: DriftDecision,
    /// Set on the copy addressed to the trainer.
    pub retrain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControlBody {
    Train { through: Minute },
    Forecast { trigger: WorkflowTrigger },
    NoForecast { trigger_id: String, reason: String },
    NoPolicy { trigger_id: String, reason: String },
    DeployStatus { trigger_id: String, policy_id: String, status: DeployStatus, reason: String },
    ModelRejected { cell_id: CellId, model_id: String, reasons: Vec<String> },
    Anomaly { tags: Vec<AnomalyTag> },
    IntegrityReject { msg_id: String, sender: AgentId, recipient: AgentId, kind: MessageKind, reason: String },
}

/// Free-form audit note; `event` becomes the entry kind.
pub fn audit_note(event: &str, rationale: impl Into<String>, detail: Value) -> Value {
    serde_json::json!({ "event": event, "rationale": rationale.into(), "detail": detail })
}
