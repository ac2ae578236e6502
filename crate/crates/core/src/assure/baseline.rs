//! Independent baseline: local linear fits of recent telemetry and policy
//! simulation on top of them.

use serde::{Deserialize, Serialize};

use super::policy::Policy;
use crate::error::{Error, Result};
use crate::kpi::{CellId, CellParams, CellState, KpiSample, Minute};
use crate::netsim::apply_offload;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub window: usize,
    pub min_samples: usize,
    /// Below this PRB spread the SINR/throughput lines use config slopes.
    pub min_prb_spread: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { window: 30, min_samples: 10, min_prb_spread: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
}

impl Line {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalBaselineModel {
    pub cell_id: CellId,
    /// PRB against users: slope is the effective per-user cost, intercept the floor.
    pub prb: Line,
    pub sinr: Line,
    pub thr: Line,
    /// True when users did not vary and the PRB slope came from the prior.
    pub prb_fallback: bool,
    pub window: (Minute, Minute),
    /// Robust (MAD-based) sd of PRB residuals over the window.
    pub residual_sd: f64,
}

/// Ordinary least squares; `None` when `x` has no variance.
pub fn ols(x: &[f64], y: &[f64]) -> Option<Line> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some(Line { intercept: my - slope * mx, slope })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn robust_sd(r: &[f64]) -> f64 {
    let m = median(r.to_vec());
    1.4826 * median(r.iter().map(|x| (x - m).abs()).collect())
}

/// Fits the cell's recent behavior from its last `cfg.window` samples.
///
/// With constant users the per-user PRB cost is the configured one divided by
/// the capacity ratio observed in the latest sample, and the line is anchored
/// on that sample; this keeps a capacity drift visible without user variation.
pub fn fit_local_model(
    recent: &[KpiSample],
    cell_id: &CellId,
    prior: &CellParams,
    cfg: &FitConfig,
) -> Result<LocalBaselineModel> {
    let mine: Vec<&KpiSample> = recent.iter().filter(|s| &s.cell_id == cell_id).collect();
    let mine = &mine[mine.len().saturating_sub(cfg.window)..];
    if mine.len() < cfg.min_samples.max(2) {
        return Err(Error::InsufficientData(format!(
            "{} samples for {cell_id}, need {}",
            mine.len(),
            cfg.min_samples
        )));
    }
    let rrc: Vec<f64> = mine.iter().map(|s| s.rrc_users as f64).collect();
    let prb: Vec<f64> = mine.iter().map(|s| s.prb_util).collect();
    let sinr: Vec<f64> = mine.iter().map(|s| s.sinr_db).collect();
    let thr: Vec<f64> = mine.iter().map(|s| s.thr_mbps).collect();
    let last = mine[mine.len() - 1];

    let full_thr = prior.capacity_mbps * prior.efficiency;
    let cap_ratio = {
        let r = last.thr_mbps / (full_thr * (1.0 - last.prb_util));
        if r.is_finite() && r > 0.0 && last.prb_util < 1.0 {
            r
        } else {
            1.0
        }
    };
    let anchored = |slope: f64, x: f64, y: f64| Line { intercept: y - slope * x, slope };

    let (prb_line, prb_fallback) = match ols(&rrc, &prb) {
        Some(l) => (l, false),
        None => (
            anchored(prior.prb_per_ue / cap_ratio, last.rrc_users as f64, last.prb_util),
            true,
        ),
    };
    let spread = prb.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - prb.iter().copied().fold(f64::INFINITY, f64::min);
    let (sinr_line, thr_line) = if spread >= cfg.min_prb_spread {
        (ols(&prb, &sinr).expect("prb varies"), ols(&prb, &thr).expect("prb varies"))
    } else {
        (
            anchored(-prior.sinr_slope_db, last.prb_util, last.sinr_db),
            anchored(-full_thr * cap_ratio, last.prb_util, last.thr_mbps),
        )
    };
    let resid: Vec<f64> = rrc.iter().zip(&prb).map(|(u, p)| p - prb_line.at(*u)).collect();
    Ok(LocalBaselineModel {
        cell_id: cell_id.clone(),
        prb: prb_line,
        sinr: sinr_line,
        thr: thr_line,
        prb_fallback,
        window: (mine[0].t_min, last.t_min),
        residual_sd: robust_sd(&resid),
    })
}

impl LocalBaselineModel {
    /// KPI row `[rrc, thr, prb, sinr]` for a given user count.
    pub fn row(&self, users: u32) -> [f64; 4] {
        let prb = self.prb.at(users as f64).clamp(0.0, 1.0);
        [users as f64, self.thr.at(prb).max(0.0), prb, self.sinr.at(prb)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTrajectory {
    pub cell_id: CellId,
    pub with_policy: Vec<[f64; 4]>,
    pub no_action: Vec<[f64; 4]>,
}

impl CellTrajectory {
    pub fn series(&self, kpi: crate::kpi::Kpi, with_policy: bool) -> Vec<f64> {
        let rows = if with_policy { &self.with_policy } else { &self.no_action };
        rows.iter().map(|r| r[kpi.index()]).collect()
    }
}

/// Simulated trajectories over a policy's lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedTrajectories {
    pub label: String,
    pub minutes: Vec<Minute>,
    pub source: CellTrajectory,
    pub target: CellTrajectory,
    pub target_residual_sd: f64,
}

/// Projects both cells over the policy ttl with users held at their current
/// counts, offload applied each minute as the simulator would.
pub fn simulate_policy(
    policy: &Policy,
    models: &[LocalBaselineModel],
    current: &[KpiSample],
    nominal_source: u32,
) -> Result<SimulatedTrajectories> {
    let d = &policy.directive;
    let find_model = |c: &CellId| {
        models
            .iter()
            .find(|m| &m.cell_id == c)
            .ok_or_else(|| Error::InsufficientData(format!("no local model for {c}")))
    };
    let find_now = |c: &CellId| {
        current
            .iter()
            .rfind(|s| &s.cell_id == c)
            .ok_or_else(|| Error::InsufficientData(format!("no current sample for {c}")))
    };
    let (ms, mt) = (find_model(&d.source_cell)?, find_model(&d.target_cell)?);
    let (ns, nt) = (find_now(&d.source_cell)?, find_now(&d.target_cell)?);

    let minutes: Vec<Minute> = (d.active_from..d.active_from + d.ttl_min).collect();
    let mut source = CellTrajectory { cell_id: d.source_cell.clone(), with_policy: vec![], no_action: vec![] };
    let mut target = CellTrajectory { cell_id: d.target_cell.clone(), with_policy: vec![], no_action: vec![] };
    for &t in &minutes {
        let mut s = CellState::fresh(ns.rrc_users);
        let mut g = CellState::fresh(nt.rrc_users);
        source.no_action.push(ms.row(s.rrc_users));
        target.no_action.push(mt.row(g.rrc_users));
        apply_offload(&mut s, &mut g, d, t, nominal_source);
        source.with_policy.push(ms.row(s.rrc_users));
        target.with_policy.push(mt.row(g.rrc_users));
    }
    Ok(SimulatedTrajectories {
        label: "independent-baseline".into(),
        minutes,
        source,
        target,
        target_residual_sd: mt.residual_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpi::{evaluate, DriftEvent, NoiseSd};
    use crate::netsim::OffloadDirective;

    pub fn params(ppu: f64, cap: f64, nominal: u32) -> CellParams {
        CellParams {
            capacity_mbps: cap,
            nominal_rrc: nominal,
            prb_per_ue: ppu,
            prb_idle: 0.0,
            sinr_ref_db: 25.0,
            sinr_slope_db: 15.0,
            efficiency: 0.9,
            noise_sd: NoiseSd::default(),
        }
    }

    fn series(cell: &str, p: &CellParams, state: &CellState, users: impl Iterator<Item = u32>) -> Vec<KpiSample> {
        let c = CellId::new(cell);
        users
            .enumerate()
            .map(|(t, u)| {
                let s = CellState { rrc_users: u, ..state.clone() };
                evaluate(t as Minute, &c, &s, p, 1)
            })
            .collect()
    }

    #[test]
    fn recovers_slope_on_noiseless_data() {
        let p = params(0.004, 200.0, 120);
        let s = series("A", &p, &CellState::fresh(0), (0..30).map(|i| 100 + 3 * i));
        let m = fit_local_model(&s, &CellId::new("A"), &p, &FitConfig::default()).unwrap();
        assert!((m.prb.slope - 0.004).abs() < 1e-9);
        assert!(m.prb.intercept.abs() < 1e-9);
        assert!((m.sinr.slope + 15.0).abs() < 1e-9);
        assert!(!m.prb_fallback);
    }

    #[test]
    fn sees_drifted_capacity() {
        let p = params(0.004, 150.0, 80);
        let ev = DriftEvent {
            t_start: 0,
            cell_id: CellId::new("B"),
            prb_base_delta: 0.15,
            cap_factor: 0.6,
            sinr_delta_db: -2.0,
        };
        let drifted = crate::kpi::apply_drift_event(&CellState::fresh(0), &ev, 0);
        let s = series("B", &p, &drifted, (0..30).map(|i| 60 + i));
        let m = fit_local_model(&s, &CellId::new("B"), &p, &FitConfig::default()).unwrap();
        assert!((m.prb.slope - 0.004 / 0.6).abs() < 1e-9);
        assert!((m.prb.intercept - 0.15).abs() < 1e-9);

        // constant users: fallback derives the same slope from the capacity ratio
        let s = series("B", &p, &drifted, std::iter::repeat_n(80, 30));
        let m = fit_local_model(&s, &CellId::new("B"), &p, &FitConfig::default()).unwrap();
        assert!(m.prb_fallback);
        assert!((m.prb.slope - 0.004 / 0.6).abs() < 1e-9);
        assert!((m.row(100)[2] - (0.15 + 100.0 * 0.004 / 0.6)).abs() < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        let p = params(0.004, 200.0, 120);
        let s = series("A", &p, &CellState::fresh(0), (0..9).map(|i| 100 + i));
        assert!(fit_local_model(&s, &CellId::new("A"), &p, &FitConfig::default()).is_err());
    }

    fn policy(f: f64) -> Policy {
        Policy {
            policy_id: "p".into(),
            t_decided: 139,
            directive: OffloadDirective {
                source_cell: CellId::new("A"),
                target_cell: CellId::new("B"),
                fraction: f,
                active_from: 140,
                ttl_min: 30,
            },
            max_prb: 0.8,
            max_rrc: 208.0,
            predicted_impact: vec![],
            forecast_id: "f".into(),
        }
    }

    fn both(drift: bool) -> (Vec<LocalBaselineModel>, Vec<KpiSample>) {
        let pa = params(0.00383, 200.0, 120);
        let pb = params(0.00383, 150.0, 80);
        let a = series("A", &pa, &CellState::fresh(0), (0..30).map(|i| 150 + 2 * i).chain([208]));
        let mut sb = CellState::fresh(80);
        if drift {
            sb = CellState { prb_base_offset: 0.15, cap_factor: 0.6, sinr_offset_db: -2.0, rrc_users: 80 };
        }
        let b = series("B", &pb, &sb, std::iter::repeat_n(80, 31));
        let cfg = FitConfig::default();
        let models = vec![
            fit_local_model(&a, &CellId::new("A"), &pa, &cfg).unwrap(),
            fit_local_model(&b, &CellId::new("B"), &pb, &cfg).unwrap(),
        ];
        (models, vec![a[30].clone(), b[30].clone()])
    }

    #[test]
    fn zero_fraction_is_no_action() {
        let (m, now) = both(true);
        let sim = simulate_policy(&policy(0.0), &m, &now, 120).unwrap();
        assert_eq!(sim.source.with_policy, sim.source.no_action);
        assert_eq!(sim.target.with_policy, sim.target.no_action);
        assert_eq!(sim.minutes.len(), 30);
    }

    #[test]
    fn drift_pushes_neighbor_over_limit() {
        let (m, now) = both(true);
        let sim = simulate_policy(&policy(0.325), &m, &now, 120).unwrap();
        // 29 users join 80 on a cell with floor 0.15 and cost 0.00383/0.6
        let peak = sim.target.series(crate::kpi::Kpi::Prb, true).into_iter().fold(0.0, f64::max);
        let expected = 0.15 + 109.0 * 0.00383 / 0.6;
        assert!((peak - expected).abs() < 1e-9, "{peak}");

        let sim = simulate_policy(&policy(0.4), &m, &now, 120).unwrap();
        let peak = sim.target.series(crate::kpi::Kpi::Prb, true).into_iter().fold(0.0, f64::max);
        assert!(peak > 0.85);

        let (m, now) = both(false);
        let sim = simulate_policy(&policy(0.4), &m, &now, 120).unwrap();
        let peak = sim.target.series(crate::kpi::Kpi::Prb, true).into_iter().fold(0.0, f64::max);
        assert!(peak < 0.85);
    }

    #[test]
    fn missing_model() {
        let (m, now) = both(false);
        assert!(simulate_policy(&policy(0.3), &m[..1], &now, 120).is_err());
    }
}
