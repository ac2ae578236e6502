//! Agent messages and their integrity tags.

use std::fmt;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kpi::Minute;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(s: impl Into<String>) -> Self {
        AgentId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Telemetry,
    Features,
    Model,
    Forecast,
    Policy,
    Baseline,
    Verdict,
    DriftAlert,
    DeployCmd,
    Audit,
    Control,
}

impl MessageKind {
    pub const ALL: [MessageKind; 11] = [
        MessageKind::Telemetry,
        MessageKind::Features,
        MessageKind::Model,
        MessageKind::Forecast,
        MessageKind::Policy,
        MessageKind::Baseline,
        MessageKind::Verdict,
        MessageKind::DriftAlert,
        MessageKind::DeployCmd,
        MessageKind::Audit,
        MessageKind::Control,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            MessageKind::Telemetry => "telemetry",
            MessageKind::Features => "features",
            MessageKind::Model => "model",
            MessageKind::Forecast => "forecast",
            MessageKind::Policy => "policy",
            MessageKind::Baseline => "baseline",
            MessageKind::Verdict => "verdict",
            MessageKind::DriftAlert => "drift_alert",
            MessageKind::DeployCmd => "deploy_cmd",
            MessageKind::Audit => "audit",
            MessageKind::Control => "control",
        }
    }

    pub fn parse(tag: &str) -> Option<MessageKind> {
        MessageKind::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub msg_id: String,
    pub t_min: Minute,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub kind: MessageKind,
    pub payload: Value,
    #[serde(default)]
    pub integrity_tag: String,
}

impl AgentMessage {
    /// Unsealed message; fails if `payload` cannot be represented as JSON.
    pub fn new<T: Serialize>(
        msg_id: impl Into<String>,
        t_min: Minute,
        sender: AgentId,
        recipient: AgentId,
        kind: MessageKind,
        payload: &T,
    ) -> Result<Self> {
        let payload = serde_json::to_value(payload).map_err(|e| Error::Payload(e.to_string()))?;
        Ok(AgentMessage {
            msg_id: msg_id.into(),
            t_min,
            sender,
            recipient,
            kind,
            payload,
            integrity_tag: String::new(),
        })
    }

    /// Sorted-key JSON of every field except the tag.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let v = json!({
            "msg_id": self.msg_id,
            "t_min": self.t_min,
            "sender": self.sender,
            "recipient": self.recipient,
            "kind": self.kind,
            "payload": self.payload,
        });
        serde_json::to_vec(&v).expect("json value serializes")
    }

    pub fn payload_as<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.payload.clone())
            .map_err(|e| Error::Payload(format!("{} from {}: {e}", self.kind, self.sender)))
    }

    /// Short digest used in transcripts.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }
}

fn tag_for(bytes: &[u8], key: &[u8]) -> String {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac takes any key length");
    mac.update(bytes);
    hex::encode(mac.finalize().into_bytes())
}

pub fn seal_message(mut m: AgentMessage, key: &[u8]) -> AgentMessage {
    m.integrity_tag = tag_for(&m.canonical_bytes(), key);
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "snake_case")]
pub enum Verification {
    Accept,
    Reject(String),
}

impl Verification {
    pub fn is_accept(&self) -> bool {
        *self == Verification::Accept
    }
}

/// Tag check only; sender authorization is layered on by the registry.
pub fn verify_tag(m: &AgentMessage, key: &[u8]) -> Verification {
    let Ok(tag) = hex::decode(&m.integrity_tag) else {
        return Verification::Reject("integrity tag is not hex".into());
    };
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac takes any key length");
    mac.update(&m.canonical_bytes());
    if mac.verify_slice(&tag).is_ok() {
        Verification::Accept
    } else {
        Verification::Reject("integrity tag mismatch".into())
    }
}

/// Run key derived from the scenario seed.
pub fn run_key(seed: u64) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(b"ranassure-run-key");
    h.update(seed.to_le_bytes());
    h.finalize().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg() -> AgentMessage {
        AgentMessage::new("m1", 5, "DCA".into(), "PFA".into(), MessageKind::Telemetry, &json!({"b": 1.5, "a": [1, 2]}))
            .unwrap()
    }

    #[test]
    fn seal_round_trip() {
        let key = run_key(7);
        let m = seal_message(msg(), &key);
        assert!(verify_tag(&m, &key).is_accept());
        assert_eq!(seal_message(msg(), &key), m);
        assert_ne!(seal_message(msg(), &run_key(8)).integrity_tag, m.integrity_tag);
    }

    #[test]
    fn tamper_detected() {
        let key = run_key(7);
        let m = seal_message(msg(), &key);
        let mut bytes = serde_json::to_vec(&m).unwrap();
        let pos = bytes.windows(3).position(|w| w == b"1.5").unwrap();
        bytes[pos] = b'2';
        let flipped: AgentMessage = serde_json::from_slice(&bytes).unwrap();
        assert!(!verify_tag(&flipped, &key).is_accept());
        let mut s = m.clone();
        s.sender = "MTA".into();
        assert!(!verify_tag(&s, &key).is_accept());
    }

    #[test]
    fn canonical_key_order() {
        let a = AgentMessage::new("m", 0, "A".into(), "B".into(), MessageKind::Control, &json!({"x": 1, "y": 2})).unwrap();
        let text = String::from_utf8(a.canonical_bytes()).unwrap();
        assert!(text.starts_with("{\"kind\":\"control\",\"msg_id\":\"m\",\"payload\":{\"x\":1,\"y\":2}"));
    }

    #[test]
    fn unserializable_payload() {
        let mut bad = std::collections::BTreeMap::new();
        bad.insert((1u8, 2u8), 3);
        assert!(matches!(
            AgentMessage::new("m", 0, "A".into(), "B".into(), MessageKind::Control, &bad),
            Err(Error::Payload(_))
        ));
    }

    #[test]
    fn kind_tags() {
        for k in MessageKind::ALL {
            assert_eq!(MessageKind::parse(k.tag()), Some(k));
            assert_eq!(serde_json::to_value(k).unwrap(), json!(k.tag()));
        }
        assert_eq!(MessageKind::parse("gossip"), None);
    }
}
