//! Guardrail configuration and offload policy generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpi::{CellId, CellParams, Kpi, Minute};
use crate::learn::ForecastSet;
use crate::netsim::OffloadDirective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuardrailConfig {
    pub prb_trigger: f64,
    /// Users above nominal that count as an RRC overload.
    pub rrc_trigger_delta: u32,
    pub fraction_max: f64,
    /// Fraction per unit of predicted PRB above `prb_trigger`.
    pub fraction_gain: f64,
    /// Fraction per nominal-sized block of predicted users above the RRC trigger.
    pub rrc_gain: f64,
    pub neighbor_prb_max: f64,
    pub neighbor_sinr_min_db: f64,
    pub rollback_prb_worsen: f64,
    pub ttl_min: Minute,
    /// Predictor/simulator gap, in simulator residual sds, that asks for retraining.
    pub divergence_sd_multiple: f64,
}

impl Default for GuardrailConfig {
    fn default() -> Self {
        GuardrailConfig {
            prb_trigger: 0.80,
            rrc_trigger_delta: 40,
            fraction_max: 0.5,
            fraction_gain: 2.5,
            rrc_gain: 1.0,
            neighbor_prb_max: 0.85,
            neighbor_sinr_min_db: 5.0,
            rollback_prb_worsen: 0.10,
            ttl_min: 30,
            divergence_sd_multiple: 2.0,
        }
    }
}

impl GuardrailConfig {
    /// Tighter neighbor ceiling (70% PRB). The trigger moves down with it so
    /// the trigger stays below the ceiling.
    pub fn strict() -> Self {
        GuardrailConfig { neighbor_prb_max: 0.70, prb_trigger: 0.65, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.prb_trigger
            && self.prb_trigger < self.neighbor_prb_max
            && self.neighbor_prb_max <= 1.0
            && 0.0 < self.fraction_max
            && self.fraction_max <= 0.5
            && self.fraction_gain >= 0.0
            && self.rrc_gain >= 0.0
            && self.ttl_min > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid guardrail config: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactDelta {
    pub cell_id: CellId,
    pub kpi: Kpi,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub policy_id: String,
    pub t_decided: Minute,
    pub directive: OffloadDirective,
    pub max_prb: f64,
    pub max_rrc: f64,
    pub predicted_impact: Vec<ImpactDelta>,
    pub forecast_id: String,
}

impl Policy {
    pub fn impact(&self, cell: &CellId, kpi: Kpi) -> f64 {
        self.predicted_impact
            .iter()
            .find(|d| &d.cell_id == cell && d.kpi == kpi)
            .map_or(0.0, |d| d.delta)
    }
}

/// Trigger test and fraction sizing, split out so it can be checked on raw numbers.
///
/// Returns `None` when neither trigger fires. The fraction is the larger of
/// the PRB-overshoot and RRC-overshoot sizings, clamped to `[0, fraction_max]`.
pub fn offload_fraction(max_prb: f64, max_rrc: f64, nominal: u32, cfg: &GuardrailConfig) -> Option<f64> {
    let rrc_limit = (nominal + cfg.rrc_trigger_delta) as f64;
    let prb_fires = max_prb > cfg.prb_trigger;
    let rrc_fires = max_rrc > rrc_limit;
    if !(prb_fires || rrc_fires) {
        return None;
    }
    let by_prb = cfg.fraction_gain * (max_prb - cfg.prb_trigger);
    let by_rrc = if rrc_fires && nominal > 0 {
        cfg.rrc_gain * (max_rrc - rrc_limit) / nominal as f64
    } else {
        0.0
    };
    Some(by_prb.max(by_rrc).clamp(0.0, cfg.fraction_max))
}

/// Turns a source-cell forecast into an offload policy toward `neighbor`.
pub fn generate_policy(
    forecast: &ForecastSet,
    neighbor: &CellId,
    cfg: &GuardrailConfig,
    nominal: u32,
) -> Option<Policy> {
    let max_prb = forecast.max_of(Kpi::Prb);
    let max_rrc = forecast.max_of(Kpi::Rrc);
    let fraction = offload_fraction(max_prb, max_rrc, nominal, cfg)?;
    let directive = OffloadDirective {
        source_cell: forecast.cell_id.clone(),
        target_cell: neighbor.clone(),
        fraction,
        active_from: forecast.t_origin + 1,
        ttl_min: cfg.ttl_min,
    };
    Some(Policy {
        policy_id: format!("pol-{}-{}", forecast.cell_id, forecast.t_origin),
        t_decided: forecast.t_origin,
        directive,
        max_prb,
        max_rrc,
        predicted_impact: Vec::new(),
        forecast_id: forecast.forecast_id.clone(),
    })
}

/// Expected KPI shifts per cell from moving the forecast's peak excess,
/// using the cells' configured (pre-drift) per-user costs.
pub fn annotate_impact(policy: &mut Policy, source: &CellParams, target: &CellParams) {
    let d = &policy.directive;
    let excess = (policy.max_rrc - source.nominal_rrc as f64).max(0.0);
    let moved = (d.fraction * excess).round();
    let mut out = Vec::new();
    for (cell, p, sign) in [(&d.source_cell, source, -1.0), (&d.target_cell, target, 1.0)] {
        let users = sign * moved;
        let prb = users * p.prb_per_ue;
        out.push(ImpactDelta { cell_id: cell.clone(), kpi: Kpi::Rrc, delta: users });
        out.push(ImpactDelta { cell_id: cell.clone(), kpi: Kpi::Prb, delta: prb });
        out.push(ImpactDelta {
            cell_id: cell.clone(),
            kpi: Kpi::Thr,
            delta: -p.capacity_mbps * p.efficiency * prb,
        });
        out.push(ImpactDelta {
            cell_id: cell.clone(),
            kpi: Kpi::Sinr,
            delta: -p.sinr_slope_db * prb,
        });
    }
    policy.predicted_impact = out;
}
