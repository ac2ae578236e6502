//! Per-minute two-cell network engine.
//!
//! Each minute the engine rebuilds user counts from the initial attachment
//! plus the surge profile, applies any due drift event and the active
//! offload directive, evaluates the KPI mappings, and appends one sample per
//! cell to the telemetry log.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kpi::{self, CellId, CellParams, CellState, DriftEvent, DriftLedger, KpiSample, Minute};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeProfile {
    pub t_start: Minute,
    pub t_peak: Minute,
    pub peak_extra: u32,
    pub relax_end: Minute,
    pub relax_floor_extra: u32,
}

impl Default for SurgeProfile {
    fn default() -> Self {
        SurgeProfile {
            t_start: 100,
            t_peak: 140,
            peak_extra: 90,
            relax_end: 170,
            relax_floor_extra: 20,
        }
    }
}

impl SurgeProfile {
    pub fn validate(&self) -> Result<()> {
        if self.t_start < self.t_peak
            && self.t_peak <= self.relax_end
            && self.relax_floor_extra <= self.peak_extra
        {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid surge profile: {self:?}")))
        }
    }
}

/// Extra users admitted into the target cell at minute `t`.
///
/// Zero before the surge, a linear ramp to the peak, a linear relaxation to
/// the floor, then the floor. Rounded to the nearest user.
pub fn surge_extra(p: &SurgeProfile, t: Minute) -> u32 {
    let t = t as f64;
    let (start, peak, end) = (p.t_start as f64, p.t_peak as f64, p.relax_end as f64);
    let peak_extra = p.peak_extra as f64;
    let floor = p.relax_floor_extra as f64;
    let extra = if t < start {
        0.0
    } else if t < peak {
        peak_extra * (t - start) / (peak - start)
    } else if t < end {
        peak_extra + (floor - peak_extra) * (t - peak) / (end - peak)
    } else {
        floor
    };
    extra.round() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub cell_id: CellId,
    pub params: CellParams,
    pub initial_rrc: u32,
}

/// Inclusive minute range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalWindow {
    pub start: Minute,
    pub end: Minute,
}

impl Default for EvalWindow {
    fn default() -> Self {
        EvalWindow { start: 140, end: 169 }
    }
}

impl EvalWindow {
    pub fn contains(&self, t: Minute) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

fn default_duration() -> Minute {
    240
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_duration")]
    pub duration_min: Minute,
    pub seed: u64,
    /// Cell receiving the surge; the other cell is its neighbor.
    pub target_cell: CellId,
    pub cells: Vec<CellConfig>,
    #[serde(default)]
    pub surge: SurgeProfile,
    #[serde(default)]
    pub drift: Option<DriftEvent>,
    #[serde(default)]
    pub eval_window: EvalWindow,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != 2 {
            return Err(Error::Config(format!(
                "exactly two cells are supported, got {}",
                self.cells.len()
            )));
        }
        if self.cells[0].cell_id == self.cells[1].cell_id {
            return Err(Error::Config("duplicate cell id".into()));
        }
        if self.cell_index(&self.target_cell).is_none() {
            return Err(Error::Config(format!("unknown target cell {}", self.target_cell)));
        }
        for c in &self.cells {
            c.params.validate()?;
        }
        self.surge.validate()?;
        if let Some(d) = &self.drift {
            d.validate()?;
            if self.cell_index(&d.cell_id).is_none() {
                return Err(Error::Config(format!("drift on unknown cell {}", d.cell_id)));
            }
        }
        if self.eval_window.is_empty() || self.eval_window.end >= self.duration_min {
            return Err(Error::Config("eval window outside the run".into()));
        }
        Ok(())
    }

    pub fn cell_index(&self, id: &CellId) -> Option<usize> {
        self.cells.iter().position(|c| &c.cell_id == id)
    }

    pub fn cell(&self, id: &CellId) -> Option<&CellConfig> {
        self.cells.iter().find(|c| &c.cell_id == id)
    }

    pub fn target(&self) -> &CellConfig {
        self.cell(&self.target_cell).expect("validated target cell")
    }

    pub fn neighbor(&self) -> &CellConfig {
        self.cells
            .iter()
            .find(|c| c.cell_id != self.target_cell)
            .expect("validated two-cell topology")
    }

    pub fn initial_total(&self) -> u32 {
        self.cells.iter().map(|c| c.initial_rrc).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadDirective {
    pub source_cell: CellId,
    pub target_cell: CellId,
    pub fraction: f64,
    pub active_from: Minute,
    pub ttl_min: Minute,
}

impl OffloadDirective {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=0.5).contains(&self.fraction) && self.source_cell != self.target_cell {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid offload directive: {self:?}")))
        }
    }

    pub fn is_active(&self, t: Minute) -> bool {
        t >= self.active_from && t < self.active_from.saturating_add(self.ttl_min)
    }
}

/// Moves `round(fraction * excess)` users from `source` to `target` when the
/// directive is active at `t`. Returns the number of users moved.
pub fn apply_offload(
    source: &mut CellState,
    target: &mut CellState,
    d: &OffloadDirective,
    t: Minute,
    nominal_source: u32,
) -> u32 {
    if !d.is_active(t) {
        return 0;
    }
    let excess = source.rrc_users.saturating_sub(nominal_source);
    let moved = (d.fraction * excess as f64).round() as u32;
    let moved = moved.min(source.rrc_users);
    source.rrc_users -= moved;
    target.rrc_users += moved;
    moved
}

/// Ordered per-minute, per-cell samples of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TelemetryLog {
    pub samples: Vec<KpiSample>,
}

pub const CSV_HEADER: &str = "t,cell,rrc,thr_mbps,prb,sinr_db";

/// Rounds to the 4-decimal resolution used by the CSV artifact.
pub fn quantize(x: f64) -> f64 {
    let q = (x * 1e4).round() / 1e4;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

impl TelemetryLog {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn for_cell<'a>(&'a self, cell: &'a CellId) -> impl Iterator<Item = &'a KpiSample> + 'a {
        self.samples.iter().filter(move |s| &s.cell_id == cell)
    }

    pub fn at(&self, t: Minute, cell: &CellId) -> Option<&KpiSample> {
        self.samples.iter().find(|s| s.t_min == t && &s.cell_id == cell)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 40);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{:.4},{:.4}",
                s.t_min, s.cell_id, s.rrc_users, s.thr_mbps, s.prb_util, s.sinr_db
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => {
                return Err(Error::Csv {
                    line: 1,
                    reason: format!("expected header `{CSV_HEADER}`"),
                })
            }
        }
        let mut samples = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| Error::Csv { line: i + 1, reason };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(err(format!("expected 6 columns, got {}", cols.len())));
            }
            let f = |s: &str| s.trim().parse::<f64>().map_err(|e| err(e.to_string()));
            samples.push(KpiSample {
                t_min: cols[0].trim().parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
                cell_id: CellId::new(cols[1].trim()),
                rrc_users: cols[2].trim().parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
                thr_mbps: f(cols[3])?,
                prb_util: f(cols[4])?,
                sinr_db: f(cols[5])?,
            });
        }
        Ok(TelemetryLog { samples })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }
}

/// Hook invoked after every simulated minute.
pub trait Controller {
    fn after_tick(&mut self, t: Minute, sim: &mut Simulation) -> Result<()>;
}

#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    t: Minute,
    states: Vec<CellState>,
    drift_ledger: DriftLedger,
    directive: Option<OffloadDirective>,
    last_moved: u32,
    log: TelemetryLog,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let states = config
            .cells
            .iter()
            .map(|c| CellState::fresh(c.initial_rrc))
            .collect();
        Ok(Simulation {
            config,
            t: 0,
            states,
            drift_ledger: DriftLedger::default(),
            directive: None,
            last_moved: 0,
            log: TelemetryLog::default(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Next minute to be simulated.
    pub fn time(&self) -> Minute {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.config.duration_min
    }

    pub fn state(&self, cell: &CellId) -> Option<&CellState> {
        self.config.cell_index(cell).map(|i| &self.states[i])
    }

    pub fn log(&self) -> &TelemetryLog {
        &self.log
    }

    pub fn into_log(self) -> TelemetryLog {
        self.log
    }

    pub fn directive(&self) -> Option<&OffloadDirective> {
        self.directive.as_ref()
    }

    pub fn last_moved(&self) -> u32 {
        self.last_moved
    }

    pub fn install_directive(&mut self, d: OffloadDirective) -> Result<()> {
        d.validate()?;
        for c in [&d.source_cell, &d.target_cell] {
            if self.config.cell_index(c).is_none() {
                return Err(Error::Invalid(format!("directive names unknown cell {c}")));
            }
        }
        self.directive = Some(d);
        Ok(())
    }

    pub fn remove_directive(&mut self) -> Option<OffloadDirective> {
        self.directive.take()
    }

    /// Latest samples (one per cell) at minute `t`.
    pub fn samples_at(&self, t: Minute) -> Vec<KpiSample> {
        self.log.samples.iter().filter(|s| s.t_min == t).cloned().collect()
    }

    pub fn step_minute(&mut self, t: Minute) -> Result<Vec<KpiSample>> {
        if self.is_finished() {
            return Err(Error::PastDuration {
                duration: self.config.duration_min,
            });
        }
        if t != self.t {
            return Err(Error::OutOfStep { t, expected: self.t });
        }
        let target_idx = self.config.cell_index(&self.config.target_cell).expect("validated");
        for (i, c) in self.config.cells.iter().enumerate() {
            self.states[i].rrc_users = c.initial_rrc;
        }
        self.states[target_idx].rrc_users += surge_extra(&self.config.surge, t);

        if let Some(ev) = &self.config.drift {
            if t >= ev.t_start && !self.drift_ledger.is_applied(ev) {
                let i = self.config.cell_index(&ev.cell_id).expect("validated");
                self.drift_ledger.apply(&mut self.states[i], ev, t)?;
            }
        }

        self.last_moved = 0;
        if let Some(d) = &self.directive {
            let si = self.config.cell_index(&d.source_cell).expect("checked on install");
            let ti = self.config.cell_index(&d.target_cell).expect("checked on install");
            let nominal = self.config.cells[si].params.nominal_rrc;
            let (src, dst) = pair_mut(&mut self.states, si, ti);
            self.last_moved = apply_offload(src, dst, d, t, nominal);
        }

        let mut out = Vec::with_capacity(self.states.len());
        for (c, s) in self.config.cells.iter().zip(&self.states) {
            let mut k = kpi::evaluate(t, &c.cell_id, s, &c.params, self.config.seed);
            k.thr_mbps = quantize(k.thr_mbps);
            k.prb_util = quantize(k.prb_util);
            k.sinr_db = quantize(k.sinr_db);
            out.push(k);
        }
        self.log.samples.extend(out.iter().cloned());
        self.t += 1;
        Ok(out)
    }
}

fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (l, r) = v.split_at_mut(b);
        (&mut l[a], &mut r[0])
    } else {
        let (l, r) = v.split_at_mut(a);
        (&mut r[0], &mut l[b])
    }
}

/// A run that stopped early, with everything simulated up to the failure.
#[derive(Debug)]
pub struct Aborted {
    pub error: Error,
    pub partial: TelemetryLog,
}

pub fn run_scenario(
    config: ScenarioConfig,
    mut controller: Option<&mut dyn Controller>,
) -> std::result::Result<TelemetryLog, Aborted> {
    let mut sim = Simulation::new(config).map_err(|error| Aborted {
        error,
        partial: TelemetryLog::default(),
    })?;
    for t in 0..sim.config.duration_min {
        if let Err(error) = sim.step_minute(t) {
            return Err(Aborted { error, partial: sim.into_log() });
        }
        if let Some(c) = controller.as_deref_mut() {
            if let Err(e) = c.after_tick(t, &mut sim) {
                let error = match e {
                    e @ Error::Controller { .. } => e,
                    other => Error::Controller { t, reason: other.to_string() },
                };
                return Err(Aborted { error, partial: sim.into_log() });
            }
        }
    }
    Ok(sim.into_log())
}
