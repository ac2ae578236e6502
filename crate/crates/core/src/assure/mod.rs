//! Policy generation, independent verification, drift detection,
//! deployment, and auditing.

pub mod audit;
pub mod baseline;
pub mod deploy;
pub mod drift;
pub mod policy;
pub mod verify;

pub use audit::{verify_chain, AuditEntry, AuditLog};
pub use baseline::{fit_local_model, simulate_policy, FitConfig, LocalBaselineModel, SimulatedTrajectories};
pub use deploy::{rollback, DeployStatus, Deployer, DeploymentRecord};
pub use drift::{
    assess_drift, cusum_step, ks_two_sample, CusumState, DriftAction, DriftDecision, DriftMethod, DriftReport,
    Severity,
};
pub use policy::{annotate_impact, generate_policy, offload_fraction, GuardrailConfig, ImpactDelta, Policy};
pub use verify::{verify_policy, Check, Decision, Verdict};
