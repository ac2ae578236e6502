//! Agent registration, authorization, and routing checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::message::{verify_tag, AgentId, AgentMessage, MessageKind, Verification};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Alive,
    Failed,
    Restarted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub agent_id: AgentId,
    /// Kind tags as strings so unknown tags can be refused at registration.
    pub kinds_consumed: Vec<String>,
    pub kinds_produced: Vec<String>,
    pub status: AgentStatus,
}

impl AgentDescriptor {
    pub fn new(id: &str, consumed: &[MessageKind], produced: &[MessageKind]) -> Self {
        AgentDescriptor {
            agent_id: AgentId::new(id),
            kinds_consumed: consumed.iter().map(|k| k.tag().to_string()).collect(),
            kinds_produced: produced.iter().map(|k| k.tag().to_string()).collect(),
            status: AgentStatus::Alive,
        }
    }

    pub fn consumes(&self, kind: MessageKind) -> bool {
        self.kinds_consumed.iter().any(|k| k == kind.tag())
    }

    pub fn produces(&self, kind: MessageKind) -> bool {
        self.kinds_produced.iter().any(|k| k == kind.tag())
    }
}

/// Handed to an agent on registration; carries the sealing key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationToken {
    pub agent_id: AgentId,
    pub run_key: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Registry {
    agents: BTreeMap<AgentId, AgentDescriptor>,
    run_key: Vec<u8>,
}

impl Registry {
    pub fn new(run_key: Vec<u8>) -> Self {
        Registry { agents: BTreeMap::new(), run_key }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn get(&self, id: &AgentId) -> Option<&AgentDescriptor> {
        self.agents.get(id)
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &AgentDescriptor> {
        self.agents.values()
    }

    pub fn register_agent(&mut self, desc: AgentDescriptor) -> Result<RegistrationToken> {
        if self.agents.contains_key(&desc.agent_id) {
            return Err(Error::Registry(format!("agent {} already registered", desc.agent_id)));
        }
        if let Some(bad) = desc
            .kinds_consumed
            .iter()
            .chain(&desc.kinds_produced)
            .find(|k| MessageKind::parse(k).is_none())
        {
            return Err(Error::Registry(format!("agent {} names unknown kind {bad:?}", desc.agent_id)));
        }
        let token = RegistrationToken { agent_id: desc.agent_id.clone(), run_key: self.run_key.clone() };
        self.agents.insert(desc.agent_id.clone(), desc);
        Ok(token)
    }

    pub fn set_status(&mut self, id: &AgentId, status: AgentStatus) {
        if let Some(d) = self.agents.get_mut(id) {
            d.status = status;
        }
    }

    /// Kinds with a live consumer but no live producer, or the reverse.
    pub fn routing_alerts(&self) -> Vec<String> {
        let live = || self.agents.values().filter(|d| d.status != AgentStatus::Failed);
        let mut alerts = Vec::new();
        for kind in MessageKind::ALL {
            let consumers: Vec<&AgentId> = live().filter(|d| d.consumes(kind)).map(|d| &d.agent_id).collect();
            let producers: Vec<&AgentId> = live().filter(|d| d.produces(kind)).map(|d| &d.agent_id).collect();
            if !consumers.is_empty() && producers.is_empty() {
                alerts.push(format!("kind {kind} consumed by {} has no producer", join(&consumers)));
            }
            if !producers.is_empty() && consumers.is_empty() {
                alerts.push(format!("kind {kind} produced by {} has no consumer", join(&producers)));
            }
        }
        alerts
    }

    /// Tag, sender, and recipient checks.
    pub fn verify_message(&self, m: &AgentMessage) -> Verification {
        let Some(sender) = self.agents.get(&m.sender) else {
            return Verification::Reject(format!("unauthorized: sender {} is not registered", m.sender));
        };
        if !self.agents.contains_key(&m.recipient) {
            return Verification::Reject(format!("unknown recipient {}", m.recipient));
        }
        if let v @ Verification::Reject(_) = verify_tag(m, &self.run_key) {
            return v;
        }
        if !sender.produces(m.kind) {
            return Verification::Reject(format!("unauthorized: {} may not send {}", m.sender, m.kind));
        }
        Verification::Accept
    }
}

fn join(ids: &[&AgentId]) -> String {
    ids.iter().map(|i| i.as_str()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::message::{run_key, seal_message};
    use MessageKind::*;

    #[test]
    fn duplicate_and_unknown_kinds() {
        let mut r = Registry::new(run_key(1));
        r.register_agent(AgentDescriptor::new("A", &[], &[Control])).unwrap();
        assert!(r.register_agent(AgentDescriptor::new("A", &[], &[])).is_err());
        let mut d = AgentDescriptor::new("B", &[], &[]);
        d.kinds_consumed.push("gossip".into());
        assert!(r.register_agent(d).is_err());
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn consumer_without_producer_alerts() {
        let mut r = Registry::new(run_key(1));
        r.register_agent(AgentDescriptor::new("A", &[Forecast], &[])).unwrap();
        let alerts = r.routing_alerts();
        assert_eq!(alerts.len(), 1);
        assert!(alerts[0].contains("forecast"));
        r.register_agent(AgentDescriptor::new("P", &[], &[Forecast])).unwrap();
        assert!(r.routing_alerts().is_empty());
    }

    #[test]
    fn sender_checks() {
        let key = run_key(1);
        let mut r = Registry::new(key.clone());
        r.register_agent(AgentDescriptor::new("A", &[], &[Control])).unwrap();
        r.register_agent(AgentDescriptor::new("B", &[Control], &[])).unwrap();
        let m = |from: &str, kind| {
            seal_message(
                AgentMessage::new("m", 0, from.into(), "B".into(), kind, &serde_json::json!(1)).unwrap(),
                &key,
            )
        };
        assert!(r.verify_message(&m("A", Control)).is_accept());
        assert!(matches!(r.verify_message(&m("X", Control)), Verification::Reject(s) if s.starts_with("unauthorized")));
        assert!(!r.verify_message(&m("A", Model)).is_accept());
    }
}
