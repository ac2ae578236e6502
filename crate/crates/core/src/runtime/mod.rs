//! Agent messaging, registry, lockstep dispatch, and wire transport.

pub mod bus;
pub mod message;
pub mod orchestrator;
pub mod registry;
pub mod wire;

pub use bus::{Bus, TranscriptEntry};
pub use message::{run_key, seal_message, verify_tag, AgentId, AgentMessage, MessageKind, Verification};
pub use orchestrator::{
    Agent, FaultPlan, Orchestrator, PhaseOutcome, PhaseReport, RecoveryAction, TamperPlan, TickCtx, TickReport,
    TriggerCause, TriggerQueue, WorkflowTrigger,
};
pub use registry::{AgentDescriptor, AgentStatus, Registry, RegistrationToken};
pub use wire::{decode_frame, encode_frame, FrameReader, InProcess, Transport, WireTransport};
