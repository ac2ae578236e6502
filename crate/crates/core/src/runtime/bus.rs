//! Lockstep message bus with per-pair FIFO delivery and a transcript.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::message::{seal_message, AgentId, AgentMessage, MessageKind};
use super::wire::{InProcess, Transport};
use crate::error::Result;
use crate::kpi::Minute;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t_min: Minute,
    pub msg_id: String,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub kind: MessageKind,
    pub digest: String,
    pub accepted: bool,
}

pub struct Bus {
    key: Vec<u8>,
    next_id: u64,
    queue: VecDeque<AgentMessage>,
    transcript: Vec<TranscriptEntry>,
    transport: Box<dyn Transport>,
}

impl Bus {
    pub fn new(key: Vec<u8>) -> Self {
        Self::with_transport(key, Box::new(InProcess))
    }

    pub fn with_transport(key: Vec<u8>, transport: Box<dyn Transport>) -> Self {
        Bus { key, next_id: 0, queue: VecDeque::new(), transcript: Vec::new(), transport }
    }

    pub fn transport_name(&self) -> &'static str {
        self.transport.name()
    }

    /// Seals and enqueues; returns the message id.
    pub fn send(
        &mut self,
        t: Minute,
        sender: &AgentId,
        recipient: &AgentId,
        kind: MessageKind,
        payload: Value,
    ) -> Result<String> {
        let id = format!("m{:06}", self.next_id);
        self.next_id += 1;
        let m = AgentMessage {
            msg_id: id.clone(),
            t_min: t,
            sender: sender.clone(),
            recipient: recipient.clone(),
            kind,
            payload,
            integrity_tag: String::new(),
        };
        let m = self.transport.carry(seal_message(m, &self.key))?;
        self.queue.push_back(m);
        Ok(id)
    }

    /// Sends a frame that is not queued for delivery (registration handshake).
    pub fn announce(&mut self, m: AgentMessage) -> Result<AgentMessage> {
        self.transport.carry(seal_message(m, &self.key))
    }

    pub fn pending_for<'a>(&'a self, recipient: &'a AgentId) -> impl Iterator<Item = &'a AgentMessage> + 'a {
        self.queue.iter().filter(move |m| &m.recipient == recipient)
    }

    /// Removes and returns all queued messages for `recipient` in send order.
    pub fn take_for(&mut self, recipient: &AgentId) -> Vec<AgentMessage> {
        let (mine, rest): (VecDeque<_>, VecDeque<_>) = self.queue.drain(..).partition(|m| &m.recipient == recipient);
        self.queue = rest;
        mine.into()
    }

    /// Puts undelivered messages back ahead of everything still queued.
    pub fn requeue(&mut self, msgs: Vec<AgentMessage>) {
        for m in msgs.into_iter().rev() {
            self.queue.push_front(m);
        }
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn record(&mut self, m: &AgentMessage, accepted: bool) {
        self.transcript.push(TranscriptEntry {
            t_min: m.t_min,
            msg_id: m.msg_id.clone(),
            sender: m.sender.clone(),
            recipient: m.recipient.clone(),
            kind: m.kind,
            digest: m.digest(),
            accepted,
        });
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn transcript_digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.transcript {
            h.update(serde_json::to_vec(e).expect("entry serializes"));
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Flips the low bit of the first digit in the payload of the first
    /// queued message matching `pred`. Digits stay digits, so the message
    /// still parses but no longer matches its tag. Returns the altered id.
    pub fn tamper(&mut self, pred: impl Fn(&AgentMessage) -> bool) -> Option<String> {
        let m = self.queue.iter_mut().find(|m| pred(m))?;
        let mut text = serde_json::to_vec(&m.payload).ok()?;
        let pos = text.iter().position(|b| b.is_ascii_digit())?;
        text[pos] ^= 1;
        m.payload = serde_json::from_slice(&text).ok()?;
        Some(m.msg_id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::message::{run_key, verify_tag};
    use serde_json::json;

    #[test]
    fn per_pair_fifo_and_requeue() {
        let mut b = Bus::new(run_key(1));
        let (a, c, d) = (AgentId::new("A"), AgentId::new("C"), AgentId::new("D"));
        for i in 0..3 {
            b.send(i, &a, &c, MessageKind::Control, json!(i)).unwrap();
            b.send(i, &a, &d, MessageKind::Control, json!(i)).unwrap();
        }
        let got = b.take_for(&c);
        assert_eq!(got.iter().map(|m| m.payload.clone()).collect::<Vec<_>>(), vec![json!(0), json!(1), json!(2)]);
        b.send(9, &a, &c, MessageKind::Control, json!(9)).unwrap();
        b.requeue(got);
        let again: Vec<Value> = b.take_for(&c).into_iter().map(|m| m.payload).collect();
        assert_eq!(again, vec![json!(0), json!(1), json!(2), json!(9)]);
        assert_eq!(b.queued(), 3);
    }

    #[test]
    fn tamper_breaks_tag() {
        let key = run_key(1);
        let mut b = Bus::new(key.clone());
        b.send(0, &"A".into(), &"B".into(), MessageKind::Telemetry, json!({"prb": 0.5})).unwrap();
        assert_eq!(b.tamper(|m| m.kind == MessageKind::Telemetry).as_deref(), Some("m000000"));
        let m = b.take_for(&"B".into()).pop().unwrap();
        assert_eq!(m.payload, json!({"prb": 1.5}));
        assert!(!verify_tag(&m, &key).is_accept());
    }
}
