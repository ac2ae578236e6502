//! Closed-form mappings from cell load to the four KPIs.
//!
//! PRB utilization grows linearly with attached users, SINR falls linearly
//! with PRB load, and throughput is capacity times residual PRB headroom
//! times an efficiency factor. Drift events shift the PRB floor, scale the
//! capacity, and offset the SINR of a cell from their trigger minute on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use crate::error::{Error, Result};

/// Simulated minute.
pub type Minute = u32;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub String);

impl CellId {
    pub fn new(id: impl Into<String>) -> Self {
        CellId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CellId {
    fn from(s: &str) -> Self {
        CellId(s.to_string())
    }
}

/// The four reported KPIs, in window column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kpi {
    Rrc,
    Thr,
    Prb,
    Sinr,
}

impl Kpi {
    pub const ALL: [Kpi; 4] = [Kpi::Rrc, Kpi::Thr, Kpi::Prb, Kpi::Sinr];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Kpi::Rrc => "rrc",
            Kpi::Thr => "thr_mbps",
            Kpi::Prb => "prb",
            Kpi::Sinr => "sinr_db",
        }
    }
}

impl fmt::Display for Kpi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One cell's KPIs at one simulated minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSample {
    pub t_min: Minute,
    pub cell_id: CellId,
    pub rrc_users: u32,
    pub thr_mbps: f64,
    pub prb_util: f64,
    pub sinr_db: f64,
}

impl KpiSample {
    pub fn get(&self, kpi: Kpi) -> f64 {
        match kpi {
            Kpi::Rrc => self.rrc_users as f64,
            Kpi::Thr => self.thr_mbps,
            Kpi::Prb => self.prb_util,
            Kpi::Sinr => self.sinr_db,
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [
            self.rrc_users as f64,
            self.thr_mbps,
            self.prb_util,
            self.sinr_db,
        ]
    }
}

/// Additive Gaussian noise standard deviations for the continuous KPIs.
///
/// User counts are never perturbed so that user conservation holds exactly
/// in the reported telemetry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSd {
    #[serde(default)]
    pub thr_mbps: f64,
    #[serde(default)]
    pub prb: f64,
    #[serde(default)]
    pub sinr_db: f64,
}

impl NoiseSd {
    pub fn is_zero(&self) -> bool {
        self.thr_mbps == 0.0 && self.prb == 0.0 && self.sinr_db == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub capacity_mbps: f64,
    pub nominal_rrc: u32,
    pub prb_per_ue: f64,
    pub prb_idle: f64,
    pub sinr_ref_db: f64,
    pub sinr_slope_db: f64,
    pub efficiency: f64,
    #[serde(default)]
    pub noise_sd: NoiseSd,
}

impl CellParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.prb_per_ue > 0.0
            && (0.0..=1.0).contains(&self.efficiency)
            && self.sinr_slope_db >= 0.0
            && (0.0..=1.0).contains(&self.prb_idle)
            && self.capacity_mbps > 0.0
            && self.noise_sd.thr_mbps >= 0.0
            && self.noise_sd.prb >= 0.0
            && self.noise_sd.sinr_db >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid cell params: {self:?}")))
        }
    }
}

/// Mutable load and drift state of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub rrc_users: u32,
    pub prb_base_offset: f64,
    pub cap_factor: f64,
    pub sinr_offset_db: f64,
}

impl CellState {
    pub fn fresh(rrc_users: u32) -> Self {
        CellState {
            rrc_users,
            prb_base_offset: 0.0,
            cap_factor: 1.0,
            sinr_offset_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub t_start: Minute,
    pub cell_id: CellId,
    pub prb_base_delta: f64,
    pub cap_factor: f64,
    pub sinr_delta_db: f64,
}

impl DriftEvent {
    pub fn validate(&self) -> Result<()> {
        if self.cap_factor > 0.0 && self.cap_factor <= 1.0 && self.prb_base_delta >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid drift event: {self:?}")))
        }
    }
}

pub fn compute_prb(state: &CellState, params: &CellParams) -> f64 {
    let load = state.rrc_users as f64 * params.prb_per_ue / state.cap_factor;
    (params.prb_idle + state.prb_base_offset + load).clamp(0.0, 1.0)
}

pub fn compute_sinr(prb: f64, state: &CellState, params: &CellParams) -> f64 {
    params.sinr_ref_db - params.sinr_slope_db * prb + state.sinr_offset_db
}

pub fn compute_throughput(prb: f64, state: &CellState, params: &CellParams) -> f64 {
    params.capacity_mbps * state.cap_factor * (1.0 - prb) * params.efficiency
}

/// Tracks which drift events a cell has already absorbed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftLedger {
    applied: Vec<DriftEvent>,
}

impl DriftLedger {
    pub fn is_applied(&self, ev: &DriftEvent) -> bool {
        self.applied.contains(ev)
    }

    pub fn applied(&self) -> &[DriftEvent] {
        &self.applied
    }

    /// Applies `ev` to `state` if it is due at `t`. Returns whether it fired.
    pub fn apply(&mut self, state: &mut CellState, ev: &DriftEvent, t: Minute) -> Result<bool> {
        if self.is_applied(ev) {
            return Err(Error::DriftAlreadyApplied {
                cell: ev.cell_id.to_string(),
                t_start: ev.t_start,
            });
        }
        let next = apply_drift_event(state, ev, t);
        let fired = t >= ev.t_start;
        if fired {
            *state = next;
            self.applied.push(ev.clone());
        }
        Ok(fired)
    }
}

/// Returns the drifted state, or `state` unchanged before `ev.t_start`.
///
/// Callers that step a simulation should go through [`DriftLedger::apply`],
/// which refuses a second application of the same event.
pub fn apply_drift_event(state: &CellState, ev: &DriftEvent, t: Minute) -> CellState {
    if t < ev.t_start {
        return state.clone();
    }
    CellState {
        rrc_users: state.rrc_users,
        prb_base_offset: state.prb_base_offset + ev.prb_base_delta,
        cap_factor: state.cap_factor * ev.cap_factor,
        sinr_offset_db: state.sinr_offset_db + ev.sinr_delta_db,
    }
}

/// Standard normal draw keyed by (seed, cell, kpi, minute).
pub fn noise_draw(seed: u64, cell: &CellId, kpi: Kpi, t: Minute) -> f64 {
    let mut h = Sha256::new();
    h.update(b"kpi-noise");
    h.update(seed.to_le_bytes());
    h.update((cell.0.len() as u64).to_le_bytes());
    h.update(cell.0.as_bytes());
    h.update([kpi as u8]);
    h.update(t.to_le_bytes());
    let digest: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    StandardNormal.sample(&mut rng)
}

/// Evaluates all four KPIs for a cell, adding seeded noise when configured.
pub fn evaluate(
    t: Minute,
    cell: &CellId,
    state: &CellState,
    params: &CellParams,
    seed: u64,
) -> KpiSample {
    let prb_clean = compute_prb(state, params);
    let sinr_clean = compute_sinr(prb_clean, state, params);
    let thr_clean = compute_throughput(prb_clean, state, params);
    let sd = params.noise_sd;
    let jitter = |kpi: Kpi, sd: f64| {
        if sd == 0.0 {
            0.0
        } else {
            sd * noise_draw(seed, cell, kpi, t)
        }
    };
    KpiSample {
        t_min: t,
        cell_id: cell.clone(),
        rrc_users: state.rrc_users,
        thr_mbps: (thr_clean + jitter(Kpi::Thr, sd.thr_mbps)).max(0.0),
        prb_util: (prb_clean + jitter(Kpi::Prb, sd.prb)).clamp(0.0, 1.0),
        sinr_db: sinr_clean + jitter(Kpi::Sinr, sd.sinr_db),
    }
}
