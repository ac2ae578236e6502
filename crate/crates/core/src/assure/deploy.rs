//! Installing approved directives and rolling them back on degradation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::policy::{GuardrailConfig, Policy};
use super::verify::Verdict;
use crate::error::{Error, Result};
use crate::kpi::{CellId, CellState, Minute};
use crate::netsim::{OffloadDirective, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeployStatus {
    Refused,
    Active,
    Expired,
    RolledBack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t_min: Minute,
    /// PRB of the watched cell at deployment time.
    pub watched_prb: f64,
    pub source_state: CellState,
    pub target_state: CellState,
    pub directive: Option<OffloadDirective>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentRecord {
    pub policy_id: String,
    pub status: DeployStatus,
    pub directive: OffloadDirective,
    pub snapshot: Option<Snapshot>,
    pub verified: bool,
    pub reason: String,
    /// `(minute, event)` pairs in order.
    pub events: Vec<(Minute, String)>,
    worsen_streak: u32,
}

impl DeploymentRecord {
    fn log(&mut self, t: Minute, ev: impl Into<String>) {
        self.events.push((t, ev.into()));
    }
}

/// Keeps at most one live deployment and remembers every policy id it saw.
/// Rollback watches the PRB of `watch_cell` (the congested cell under care).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployer {
    watch_cell: CellId,
    seen: BTreeSet<String>,
    active: Option<DeploymentRecord>,
}

fn prb_at(sim: &Simulation, cell: &CellId, t: Minute) -> Result<f64> {
    sim.log()
        .at(t, cell)
        .map(|s| s.prb_util)
        .ok_or_else(|| Error::Deploy(format!("no telemetry for {cell} at {t}")))
}

fn snapshot(sim: &Simulation, d: &OffloadDirective, watch: &CellId, t: Minute) -> Result<Snapshot> {
    let src = sim
        .state(&d.source_cell)
        .ok_or_else(|| Error::Deploy(format!("unknown cell {}", d.source_cell)))?;
    let dst = sim
        .state(&d.target_cell)
        .ok_or_else(|| Error::Deploy(format!("unknown cell {}", d.target_cell)))?;
    Ok(Snapshot {
        t_min: t,
        watched_prb: prb_at(sim, watch, t)?,
        source_state: src.clone(),
        target_state: dst.clone(),
        directive: sim.directive().cloned(),
    })
}

impl Deployer {
    pub fn new(watch_cell: CellId) -> Self {
        Deployer { watch_cell, seen: BTreeSet::new(), active: None }
    }

    pub fn active(&self) -> Option<&DeploymentRecord> {
        self.active.as_ref()
    }

    fn claim(&mut self, policy: &Policy) -> Result<()> {
        if !self.seen.insert(policy.policy_id.clone()) {
            return Err(Error::Deploy(format!("policy {} already handled", policy.policy_id)));
        }
        Ok(())
    }

    /// Installs a verified policy, or returns a refusal record for a verdict
    /// that did not approve it.
    pub fn deploy_policy(
        &mut self,
        policy: &Policy,
        verdict: &Verdict,
        sim: &mut Simulation,
        t: Minute,
    ) -> Result<DeploymentRecord> {
        if verdict.policy_id != policy.policy_id {
            return Err(Error::Deploy(format!(
                "verdict for {} does not cover {}",
                verdict.policy_id, policy.policy_id
            )));
        }
        self.claim(policy)?;
        if !verdict.is_approved() {
            let mut rec = DeploymentRecord {
                policy_id: policy.policy_id.clone(),
                status: DeployStatus::Refused,
                directive: policy.directive.clone(),
                snapshot: None,
                verified: true,
                reason: format!("refused: {}", verdict.rationale),
                events: vec![],
                worsen_streak: 0,
            };
            rec.log(t, "refused");
            return Ok(rec);
        }
        self.install(policy, sim, t, true)
    }

    /// Installs a policy with no verification step.
    pub fn deploy_unverified(&mut self, policy: &Policy, sim: &mut Simulation, t: Minute) -> Result<DeploymentRecord> {
        self.claim(policy)?;
        self.install(policy, sim, t, false)
    }

    fn install(&mut self, policy: &Policy, sim: &mut Simulation, t: Minute, verified: bool) -> Result<DeploymentRecord> {
        if let Some(a) = &self.active {
            return Err(Error::Deploy(format!("{} is still active", a.policy_id)));
        }
        let snap = snapshot(sim, &policy.directive, &self.watch_cell, t)?;
        sim.install_directive(policy.directive.clone())?;
        let mut rec = DeploymentRecord {
            policy_id: policy.policy_id.clone(),
            status: DeployStatus::Active,
            directive: policy.directive.clone(),
            snapshot: Some(snap),
            verified,
            reason: if verified { "verified".into() } else { "deployed without verification".into() },
            events: vec![],
            worsen_streak: 0,
        };
        rec.log(t, format!("installed, active from {}", policy.directive.active_from));
        self.active = Some(rec.clone());
        Ok(rec)
    }

    /// Per-minute watch of the live deployment. Returns the record when its
    /// status changed (expired or rolled back).
    pub fn monitor(&mut self, sim: &mut Simulation, t: Minute, cfg: &GuardrailConfig) -> Result<Option<DeploymentRecord>> {
        let Some(rec) = self.active.as_mut() else { return Ok(None) };
        let d = rec.directive.clone();
        if t >= d.active_from + d.ttl_min {
            rec.status = DeployStatus::Expired;
            rec.log(t, "ttl elapsed");
            if sim.directive() == Some(&d) {
                sim.remove_directive();
            }
            return Ok(self.active.take());
        }
        if !d.is_active(t) {
            return Ok(None);
        }
        let base = rec.snapshot.as_ref().map_or(f64::INFINITY, |s| s.watched_prb);
        let now = prb_at(sim, &self.watch_cell, t)?;
        if now - base > cfg.rollback_prb_worsen {
            rec.worsen_streak += 1;
        } else {
            rec.worsen_streak = 0;
        }
        if rec.worsen_streak >= 3 {
            let rec = self.active.take().expect("checked above");
            return rollback(rec, sim, t).map(Some);
        }
        Ok(None)
    }
}

/// Removes the record's directive and restores whatever directive was in
/// place before it.
pub fn rollback(mut rec: DeploymentRecord, sim: &mut Simulation, t: Minute) -> Result<DeploymentRecord> {
    if rec.status != DeployStatus::Active {
        return Err(Error::Deploy(format!("{} is not active", rec.policy_id)));
    }
    sim.remove_directive();
    if let Some(prev) = rec.snapshot.as_ref().and_then(|s| s.directive.clone()) {
        sim.install_directive(prev)?;
    }
    rec.status = DeployStatus::RolledBack;
    rec.log(t, "rolled back: watched PRB worsened beyond limit for 3 minutes");
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assure::verify::Decision;
    use crate::netsim::tests::reference_config;

    fn policy(id: &str, src: &str, dst: &str, f: f64, from: Minute) -> Policy {
        Policy {
            policy_id: id.into(),
            t_decided: from - 1,
            directive: OffloadDirective {
                source_cell: CellId::new(src),
                target_cell: CellId::new(dst),
                fraction: f,
                active_from: from,
                ttl_min: 30,
            },
            max_prb: 0.9,
            max_rrc: 200.0,
            predicted_impact: vec![],
            forecast_id: "f".into(),
        }
    }

    fn verdict(id: &str, decision: Decision) -> Verdict {
        Verdict {
            policy_id: id.into(),
            t_min: 0,
            decision,
            checks: vec![],
            rationale: "because".into(),
            retrain_requested: false,
            divergence: 0.0,
        }
    }

    fn run_to(sim: &mut Simulation, t: Minute) {
        while sim.time() <= t {
            let now = sim.time();
            sim.step_minute(now).unwrap();
        }
    }

    #[test]
    fn refusal_installs_nothing() {
        let mut sim = Simulation::new(reference_config(true)).unwrap();
        run_to(&mut sim, 139);
        let mut dep = Deployer::new(CellId::new("A"));
        let p = policy("p", "A", "B", 0.4, 140);
        let rec = dep.deploy_policy(&p, &verdict("p", Decision::Rejected), &mut sim, 139).unwrap();
        assert_eq!(rec.status, DeployStatus::Refused);
        assert!(sim.directive().is_none());
        assert!(dep.deploy_policy(&p, &verdict("p", Decision::Approved), &mut sim, 139).is_err());
    }

    #[test]
    fn approved_runs_for_ttl() {
        let mut sim = Simulation::new(reference_config(false)).unwrap();
        run_to(&mut sim, 139);
        let mut dep = Deployer::new(CellId::new("A"));
        let p = policy("p", "A", "B", 0.4, 140);
        dep.deploy_policy(&p, &verdict("p", Decision::Approved), &mut sim, 139).unwrap();
        let cfg = GuardrailConfig::default();
        let mut ended = None;
        for t in 140..200 {
            sim.step_minute(t).unwrap();
            if d_active(&sim, t) {
                assert!((140..170).contains(&t));
            }
            if let Some(r) = dep.monitor(&mut sim, t, &cfg).unwrap() {
                ended = Some((t, r.status));
                break;
            }
        }
        assert_eq!(ended, Some((170, DeployStatus::Expired)));
        assert!(sim.directive().is_none());
    }

    fn d_active(sim: &Simulation, t: Minute) -> bool {
        sim.directive().is_some_and(|d| d.is_active(t))
    }

    #[test]
    fn adversarial_policy_rolled_back() {
        // the neighbor carries many users above its nominal, so an offload
        // from it floods the monitored cell
        let mut cfg = reference_config(false);
        cfg.cells[1].initial_rrc = 200;
        let mut sim = Simulation::new(cfg).unwrap();
        run_to(&mut sim, 20);
        let mut dep = Deployer::new(CellId::new("A"));
        let p = policy("bad", "B", "A", 0.5, 21);
        dep.deploy_policy(&p, &verdict("bad", Decision::Approved), &mut sim, 20).unwrap();
        let g = GuardrailConfig::default();
        let mut fired = None;
        for t in 21..40 {
            sim.step_minute(t).unwrap();
            if let Some(r) = dep.monitor(&mut sim, t, &g).unwrap() {
                fired = Some((t, r.status));
                break;
            }
        }
        assert_eq!(fired, Some((23, DeployStatus::RolledBack)));
        assert!(sim.directive().is_none());
    }
}
