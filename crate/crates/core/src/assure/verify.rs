//! Policy verification against the independent baseline.

use serde::{Deserialize, Serialize};

use super::baseline::SimulatedTrajectories;
use super::policy::{GuardrailConfig, Policy};
use crate::kpi::{Kpi, Minute};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approved,
    Rejected,
    /// A check could not be trusted because the predictor output was unusable.
    RetrainRequested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub limit: f64,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub policy_id: String,
    pub t_min: Minute,
    pub decision: Decision,
    pub checks: Vec<Check>,
    pub rationale: String,
    /// Predictor and baseline disagree enough that the model should be refreshed.
    pub retrain_requested: bool,
    /// Mean |predictor - baseline| neighbor PRB gap over the compared minutes.
    pub divergence: f64,
}

impl Verdict {
    pub fn is_approved(&self) -> bool {
        self.decision == Decision::Approved
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_NEIGHBOR_PRB: &str = "neighbor_prb_max";
pub const CHECK_NEIGHBOR_SINR: &str = "neighbor_sinr_min_db";
pub const CHECK_TARGET_IMPROVES: &str = "target_prb_improvement";
pub const CHECK_PREDICTOR_FINITE: &str = "predictor_finite";

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Judges `policy` on the simulated trajectories; `predictor_neighbor_prb` is
/// the predictor's post-policy neighbor PRB path, compared minute by minute
/// over the shorter of the two paths.
pub fn verify_policy(
    policy: &Policy,
    predictor_neighbor_prb: &[f64],
    sim: &SimulatedTrajectories,
    cfg: &GuardrailConfig,
) -> Verdict {
    let nb_prb = sim.target.series(Kpi::Prb, true);
    let nb_sinr = sim.target.series(Kpi::Sinr, true);
    let src_with = sim.source.series(Kpi::Prb, true);
    let src_without = sim.source.series(Kpi::Prb, false);

    let peak = nb_prb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = nb_sinr.iter().copied().fold(f64::INFINITY, f64::min);
    let improvement = mean(&src_without) - mean(&src_with);
    let mut checks = vec![
        Check {
            name: CHECK_NEIGHBOR_PRB.into(),
            limit: cfg.neighbor_prb_max,
            value: peak,
            pass: peak < cfg.neighbor_prb_max,
        },
        Check {
            name: CHECK_NEIGHBOR_SINR.into(),
            limit: cfg.neighbor_sinr_min_db,
            value: floor,
            pass: floor >= cfg.neighbor_sinr_min_db,
        },
        Check {
            name: CHECK_TARGET_IMPROVES.into(),
            limit: 0.0,
            value: improvement,
            pass: improvement > 0.0,
        },
    ];

    let finite = !predictor_neighbor_prb.is_empty() && predictor_neighbor_prb.iter().all(|v| v.is_finite());
    let n = predictor_neighbor_prb.len().min(nb_prb.len());
    let divergence = if finite {
        mean(&(0..n).map(|i| (predictor_neighbor_prb[i] - nb_prb[i]).abs()).collect::<Vec<_>>())
    } else {
        f64::INFINITY
    };
    let retrain_requested = !finite || divergence > cfg.divergence_sd_multiple * sim.target_residual_sd;

    let decision = if !finite {
        checks.push(Check {
            name: CHECK_PREDICTOR_FINITE.into(),
            limit: 0.0,
            value: predictor_neighbor_prb.len() as f64,
            pass: false,
        });
        Decision::RetrainRequested
    } else if checks.iter().all(|c| c.pass) {
        Decision::Approved
    } else {
        Decision::Rejected
    };

    let source = &policy.directive.source_cell;
    let neighbor = &policy.directive.target_cell;
    let f = policy.directive.fraction;
    let mut rationale = match decision {
        Decision::Approved => format!(
            "approved: offloading {:.0}% of {source}'s excess keeps {neighbor} PRB at or below {peak:.3} \
             (limit {:.2}) and SINR at or above {floor:.1} dB while {source} PRB drops by {improvement:.3}",
            f * 100.0,
            cfg.neighbor_prb_max
        ),
        Decision::RetrainRequested => {
            "retrain requested: predictor trajectory is empty or non-finite, so the policy was not judged".into()
        }
        Decision::Rejected => {
            let failed: Vec<String> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| match c.name.as_str() {
                    CHECK_NEIGHBOR_PRB => format!(
                        "simulated {neighbor} PRB peaks at {:.3}, not below the {:.2} limit",
                        c.value, c.limit
                    ),
                    CHECK_NEIGHBOR_SINR => format!(
                        "simulated {neighbor} SINR falls to {:.1} dB, under the {:.1} dB floor",
                        c.value, c.limit
                    ),
                    _ => format!("{source} PRB would not improve ({:+.3})", c.value),
                })
                .collect();
            format!("rejected offload of {:.0}% from {source}: {}", f * 100.0, failed.join("; "))
        }
    };
    if retrain_requested && finite {
        rationale.push_str(&format!(
            "; predictor and baseline differ by {divergence:.3} PRB on average, retraining requested"
        ));
    }

    Verdict {
        policy_id: policy.policy_id.clone(),
        t_min: policy.t_decided,
        decision,
        checks,
        rationale,
        retrain_requested,
        divergence,
    }
}
