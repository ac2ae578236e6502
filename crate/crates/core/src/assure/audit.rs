//! Hash-chained audit trail.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kpi::Minute;

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub t_min: Minute,
    pub actor: String,
    pub kind: String,
    pub rationale: String,
    pub body: Value,
    pub prev_hash: String,
    pub entry_hash: String,
}

impl AuditEntry {
    fn canonical_body(&self) -> Vec<u8> {
        // serde_json maps are key-sorted, so this is canonical
        let v = json!({
            "seq": self.seq,
            "t_min": self.t_min,
            "actor": self.actor,
            "kind": self.kind,
            "rationale": self.rationale,
            "body": self.body,
        });
        serde_json::to_vec(&v).expect("json value serializes")
    }

    pub fn compute_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.prev_hash.as_bytes());
        h.update(self.canonical_body());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    entries: Vec<AuditEntry>,
}

impl AuditLog {
    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> &str {
        self.entries.last().map_or(GENESIS_HASH, |e| &e.entry_hash)
    }

    pub fn append(
        &mut self,
        t_min: Minute,
        actor: &str,
        kind: &str,
        rationale: impl Into<String>,
        body: Value,
    ) -> &AuditEntry {
        let mut e = AuditEntry {
            seq: self.entries.len() as u64,
            t_min,
            actor: actor.into(),
            kind: kind.into(),
            rationale: rationale.into(),
            body,
            prev_hash: self.head().to_string(),
            entry_hash: String::new(),
        };
        e.entry_hash = e.compute_hash();
        self.entries.push(e);
        self.entries.last().expect("just pushed")
    }

    /// Appends an entry built elsewhere; it must continue the chain exactly.
    pub fn push_entry(&mut self, e: AuditEntry) -> Result<()> {
        let want = self.entries.len() as u64;
        if e.seq != want {
            return Err(Error::Audit(format!("sequence {} out of order, expected {want}", e.seq)));
        }
        if e.prev_hash != self.head() || e.entry_hash != e.compute_hash() {
            return Err(Error::Audit(format!("entry {} does not extend the chain", e.seq)));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e).expect("entry serializes"));
            s.push('\n');
        }
        s
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    /// Reads entries without checking the chain; use [`verify_chain`].
    pub fn read_jsonl(path: &Path) -> Result<Vec<AuditEntry>> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut out = Vec::new();
        for line in f.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }
}

/// `Ok` if every link holds, otherwise the index of the first bad entry.
pub fn verify_chain(entries: &[AuditEntry]) -> std::result::Result<(), usize> {
    let mut prev = GENESIS_HASH.to_string();
    for (i, e) in entries.iter().enumerate() {
        if e.seq != i as u64 || e.prev_hash != prev || e.entry_hash != e.compute_hash() {
            return Err(i);
        }
        prev = e.entry_hash.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn five() -> AuditLog {
        let mut log = AuditLog::default();
        for i in 0..5 {
            log.append(i, "VA", "verdict", format!("reason {i}"), json!({"i": i, "x": 0.5}));
        }
        log
    }

    #[test]
    fn chain_examples() {
        assert_eq!(verify_chain(&[]), Ok(()));
        let log = five();
        assert_eq!(verify_chain(log.entries()), Ok(()));
        let mut bad = log.entries().to_vec();
        bad[3].rationale.push('!');
        assert_eq!(verify_chain(&bad), Err(3));
    }

    #[test]
    fn push_entry_ordering() {
        let log = five();
        let mut other = AuditLog::default();
        for e in log.entries().iter().take(2) {
            other.push_entry(e.clone()).unwrap();
        }
        assert!(matches!(other.push_entry(log.entries()[3].clone()), Err(Error::Audit(_))));
    }

    #[test]
    fn jsonl_round_trip() {
        let log = five();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("audit.jsonl");
        log.write_jsonl(&p).unwrap();
        let back = AuditLog::read_jsonl(&p).unwrap();
        assert_eq!(back, log.entries());
        assert_eq!(verify_chain(&back), Ok(()));
    }

    proptest! {
        #[test]
        fn any_bit_flip_detected(entry in 0usize..5, byte in 0usize..400, bit in 0u8..8) {
            let log = five();
            let mut lines: Vec<Vec<u8>> = log
                .entries()
                .iter()
                .map(|e| serde_json::to_vec(e).unwrap())
                .collect();
            let target = &mut lines[entry];
            let pos = byte % target.len();
            target[pos] ^= 1 << bit;
            let parsed: std::result::Result<Vec<AuditEntry>, _> =
                lines.iter().map(|l| serde_json::from_slice::<AuditEntry>(l)).collect();
            // a flip that breaks parsing is detected by the reader instead
            if let Ok(entries) = parsed {
                if entries != log.entries() {
                    prop_assert!(verify_chain(&entries).is_err());
                }
            }
        }
    }
}
