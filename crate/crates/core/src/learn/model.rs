//! Model training, validation gate, and autoregressive forecasting.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mlp::Mlp;
use crate::data::{all_windows, FeatureWindow, NormStats, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::kpi::{CellId, Kpi, KpiSample, Minute};

pub const HORIZON: usize = 10;
pub const MIN_TRAIN_WINDOWS: usize = 50;

/// How the network output maps to the next normalized row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Output is the change from the window's last row.
    Delta,
    /// Output is the next row itself.
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    pub checkpoint_every: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub output_mode: OutputMode,
    /// Keep the checkpoint (or the untrained net) with the best validation
    /// score instead of the final weights.
    pub keep_best_checkpoint: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 17,
            epochs: 1500,
            learning_rate: 0.01,
            hidden: 32,
            checkpoint_every: 100,
            train_frac: 0.6,
            val_frac: 0.2,
            output_mode: OutputMode::Delta,
            keep_best_checkpoint: true,
        }
    }
}

impl TrainConfig {
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Hyperparameter grid searched by [`tune_and_train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningGrid {
    pub learning_rates: Vec<f64>,
    pub hidden_widths: Vec<usize>,
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid {
            learning_rates: vec![0.01, 0.003],
            hidden_widths: vec![16, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub val_rmse: [f64; 4],
    pub persistence_rmse: [f64; 4],
    /// 95th percentile of absolute one-step validation residuals.
    pub residual_q95: [f64; 4],
    pub residual_sd: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model_id: String,
    pub cell_id: CellId,
    pub layer_dims: Vec<usize>,
    pub activation: String,
    pub output_mode: OutputMode,
    pub network: Mlp,
    pub norm: NormStats,
    pub train_config: TrainConfig,
    pub config_digest: String,
    pub data_digest: String,
    pub weight_digest: String,
    pub metrics: Metrics,
    approved: bool,
}

impl ModelArtifact {
    pub fn is_approved(&self) -> bool {
        self.approved
    }

    /// KPIs the network actually models; the rest are carried by persistence.
    pub fn active_outputs(&self) -> [bool; 4] {
        std::array::from_fn(|i| !self.norm.is_degenerate(i))
    }

    fn input(&self, rows: &[[f64; 4]]) -> Vec<f64> {
        let active = self.active_outputs();
        rows.iter()
            .flat_map(|r| (0..4).map(move |i| if active[i] { 2.0 * r[i] - 1.0 } else { 0.0 }))
            .collect()
    }

    /// Next normalized row from `WINDOW_LEN` normalized rows.
    pub fn predict_next(&self, rows: &[[f64; 4]]) -> [f64; 4] {
        debug_assert_eq!(rows.len(), WINDOW_LEN);
        let out = self.network.forward(&self.input(rows));
        let last = rows[rows.len() - 1];
        let active = self.active_outputs();
        std::array::from_fn(|i| {
            if !active[i] {
                last[i]
            } else {
                match self.output_mode {
                    OutputMode::Delta => last[i] + out[i],
                    OutputMode::Level => out[i],
                }
            }
        })
    }

    /// One-step forecast in KPI units.
    pub fn one_step(&self, window: &FeatureWindow) -> [f64; 4] {
        self.norm.denormalize_row(self.predict_next(&window.values))
    }

    /// Normalized rollout without the approval check.
    fn rollout_rows(&self, window: &FeatureWindow, steps: usize) -> Vec<[f64; 4]> {
        let mut rows = window.values.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let next = self.predict_next(&rows[rows.len() - WINDOW_LEN..]);
            out.push(next);
            rows.push(next);
        }
        out
    }

    fn refresh_digest(&mut self) {
        self.weight_digest = self.network.digest();
        self.model_id = format!("mlp-{}-{}", self.cell_id, &self.weight_digest[..12]);
    }

    /// Replaces the network (e.g. after external edits) and re-derives ids.
    /// The artifact loses any approval.
    pub fn with_network(mut self, network: Mlp) -> Self {
        self.network = network;
        self.approved = false;
        self.refresh_digest();
        self
    }
}

/// A window and the KPI row (in KPI units) of the following minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub window: FeatureWindow,
    pub target: [f64; 4],
}

pub fn make_examples(series: &[KpiSample], norm: &NormStats) -> Result<Vec<Example>> {
    let windows = all_windows(series, norm)?;
    Ok(windows
        .into_iter()
        .zip(series.iter().skip(WINDOW_LEN))
        .map(|(window, next)| Example { window, target: next.values() })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub loss: f64,
    /// [`tuning_score`] on the validation split at this epoch.
    pub val_score: f64,
    pub params: Vec<f64>,
}

/// Trained artifact plus the data the validator needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub artifact: ModelArtifact,
    pub validation: Vec<Example>,
    pub holdout: Vec<Example>,
    pub checkpoints: Vec<Checkpoint>,
}

fn data_digest(series: &[KpiSample]) -> String {
    let mut h = Sha256::new();
    for s in series {
        h.update(s.t_min.to_le_bytes());
        h.update(s.cell_id.as_str().as_bytes());
        for v in s.values() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn targets(artifact: &ModelArtifact, examples: &[Example]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = examples.iter().map(|e| artifact.input(&e.window.values)).collect();
    let ys = examples
        .iter()
        .map(|e| {
            let t = artifact.norm.normalize_row(e.target);
            let last = e.window.values[WINDOW_LEN - 1];
            (0..4)
                .map(|i| match artifact.output_mode {
                    OutputMode::Delta => t[i] - last[i],
                    OutputMode::Level => t[i],
                })
                .collect()
        })
        .collect();
    (xs, ys)
}

fn rmse(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn quantile(mut xs: Vec<f64>, q: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (xs.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
}

/// Validation metrics of `artifact` on `examples`.
pub fn evaluate(artifact: &ModelArtifact, examples: &[Example]) -> Metrics {
    let mut resid: [Vec<f64>; 4] = Default::default();
    let mut pers: [Vec<f64>; 4] = Default::default();
    for e in examples {
        let pred = artifact.one_step(&e.window);
        let last = artifact.norm.denormalize_row(e.window.values[WINDOW_LEN - 1]);
        for i in 0..4 {
            resid[i].push(e.target[i] - pred[i]);
            pers[i].push(e.target[i] - last[i]);
        }
    }
    Metrics {
        val_rmse: std::array::from_fn(|i| rmse(resid[i].iter().copied())),
        persistence_rmse: std::array::from_fn(|i| rmse(pers[i].iter().copied())),
        residual_q95: std::array::from_fn(|i| quantile(resid[i].iter().map(|r| r.abs()).collect(), 0.95)),
        residual_sd: std::array::from_fn(|i| crate::data::mean_sd(&resid[i]).1),
    }
}

/// Trains one network on a gap-free training-period series.
pub fn train_model(series: &[KpiSample], cfg: &TrainConfig) -> Result<TrainOutput> {
    let cell_id = series
        .first()
        .map(|s| s.cell_id.clone())
        .ok_or_else(|| Error::InsufficientData("empty training series".into()))?;
    let norm = NormStats::fit(series)?;
    let examples = make_examples(series, &norm)?;
    if examples.len() < MIN_TRAIN_WINDOWS {
        return Err(Error::InsufficientData(format!(
            "{} training windows, need {MIN_TRAIN_WINDOWS}",
            examples.len()
        )));
    }
    let n = examples.len();
    let n_train = ((n as f64) * cfg.train_frac).round() as usize;
    let n_val = ((n as f64) * cfg.val_frac).round() as usize;
    let (train, rest) = examples.split_at(n_train);
    let (val, test) = rest.split_at(n_val.min(rest.len()));

    let dims = [WINDOW_LEN * 4, cfg.hidden, cfg.hidden, 4];
    let mut artifact = ModelArtifact {
        model_id: String::new(),
        cell_id,
        layer_dims: dims.to_vec(),
        activation: "tanh".into(),
        output_mode: cfg.output_mode,
        network: Mlp::new(&dims, cfg.seed),
        norm,
        train_config: cfg.clone(),
        config_digest: cfg.digest(),
        data_digest: data_digest(series),
        weight_digest: String::new(),
        metrics: Metrics {
            val_rmse: [0.0; 4],
            persistence_rmse: [0.0; 4],
            residual_q95: [0.0; 4],
            residual_sd: [0.0; 4],
        },
        approved: false,
    };
    let mask = artifact.active_outputs();
    let (xs, ys) = targets(&artifact, train);
    let score_now = |a: &mut ModelArtifact| {
        a.metrics = evaluate(a, val);
        tuning_score(a)
    };
    let mut best = (score_now(&mut artifact), artifact.network.params());
    let mut checkpoints = Vec::new();
    for epoch in 1..=cfg.epochs {
        let (loss, grad) = artifact.network.loss_and_grad(&xs, &ys, &mask);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                checkpoint: checkpoints.pop().map(Box::new),
            });
        }
        artifact.network.apply(&grad, cfg.learning_rate);
        if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
            let val_score = score_now(&mut artifact);
            let params = artifact.network.params();
            if val_score < best.0 {
                best = (val_score, params.clone());
            }
            checkpoints.push(Checkpoint { epoch, loss, val_score, params });
        }
    }
    if !artifact.network.is_finite() {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            checkpoint: checkpoints.pop().map(Box::new),
        });
    }
    if cfg.keep_best_checkpoint {
        artifact.network.set_params(&best.1);
    }
    artifact.refresh_digest();
    artifact.metrics = evaluate(&artifact, val);
    Ok(TrainOutput {
        artifact,
        validation: val.to_vec(),
        holdout: test.to_vec(),
        checkpoints,
    })
}

/// Mean validation RMSE relative to persistence over modeled KPIs. Any KPI
/// worse than persistence pushes the score above every admissible one.
pub fn tuning_score(a: &ModelArtifact) -> f64 {
    let active = a.active_outputs();
    let ratios: Vec<f64> = (0..4)
        .filter(|&i| active[i])
        .map(|i| {
            let p = a.metrics.persistence_rmse[i];
            if p > 0.0 {
                a.metrics.val_rmse[i] / p
            } else if a.metrics.val_rmse[i] == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    if ratios.is_empty() {
        return 0.0;
    }
    let worst = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if worst > 1.0 {
        1.0 + worst
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    }
}

/// Trains every grid point and keeps the lowest validation score.
pub fn tune_and_train(series: &[KpiSample], base: &TrainConfig, grid: &TuningGrid) -> Result<TrainOutput> {
    let mut best: Option<(f64, TrainOutput)> = None;
    for &lr in &grid.learning_rates {
        for &hidden in &grid.hidden_widths {
            let cfg = TrainConfig { learning_rate: lr, hidden, ..base.clone() };
            let out = match train_model(series, &cfg) {
                Ok(o) => o,
                Err(Error::Diverged { .. }) => continue,
                Err(e) => return Err(e),
            };
            let score = tuning_score(&out.artifact);
            if best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, out));
            }
        }
    }
    best.map(|(_, o)| o)
        .ok_or_else(|| Error::Invalid("every tuning configuration diverged".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidatorConfig {
    /// Approve only if val RMSE <= ratio * persistence RMSE per KPI.
    pub baseline_ratio: f64,
    /// Holdout rollouts must stay inside a band this many training ranges wide.
    pub range_multiple: f64,
    pub reproduce_tol: f64,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        ValidatorConfig {
            baseline_ratio: 1.0,
            range_multiple: 3.0,
            reproduce_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Validation {
    Approved { artifact: ModelArtifact },
    Rejected { artifact: ModelArtifact, reasons: Vec<String> },
}

impl Validation {
    pub fn is_approved(&self) -> bool {
        matches!(self, Validation::Approved { .. })
    }

    pub fn reasons(&self) -> &[String] {
        match self {
            Validation::Approved { .. } => &[],
            Validation::Rejected { reasons, .. } => reasons,
        }
    }
}

/// Gatekeeping: baseline comparison, rollout safety, and reproducibility.
pub fn validate_model(
    mut artifact: ModelArtifact,
    validation: &[Example],
    holdout: &[Example],
    cfg: &ValidatorConfig,
) -> Validation {
    artifact.approved = false;
    let mut reasons = Vec::new();
    let recomputed = evaluate(&artifact, validation);

    for kpi in Kpi::ALL {
        let i = kpi.index();
        let (m, p) = (recomputed.val_rmse[i], recomputed.persistence_rmse[i]);
        if !(m <= cfg.baseline_ratio * p) {
            reasons.push(format!(
                "worse than persistence on {kpi}: val rmse {m:.6} > {:.2} x {p:.6}",
                cfg.baseline_ratio
            ));
        }
    }

    let half_extra = (cfg.range_multiple - 1.0) / 2.0;
    let active = artifact.active_outputs();
    'outer: for e in holdout {
        for row in artifact.rollout_rows(&e.window, HORIZON) {
            for i in 0..4 {
                let v = artifact.norm.denormalize(i, row[i]);
                if !v.is_finite() {
                    reasons.push(format!("instability: non-finite {} in holdout rollout", Kpi::ALL[i]));
                    break 'outer;
                }
                if active[i] {
                    let r = artifact.norm.range(i);
                    let lo = artifact.norm.min[i] - half_extra * r;
                    let hi = artifact.norm.max[i] + half_extra * r;
                    if v < lo || v > hi {
                        reasons.push(format!(
                            "instability: holdout rollout {} = {v:.4} outside [{lo:.4}, {hi:.4}]",
                            Kpi::ALL[i]
                        ));
                        break 'outer;
                    }
                }
            }
        }
    }

    let stored = &artifact.metrics;
    let drift = (0..4)
        .map(|i| (stored.val_rmse[i] - recomputed.val_rmse[i]).abs())
        .fold(0.0, f64::max);
    if !(drift <= cfg.reproduce_tol) || artifact.network.digest() != artifact.weight_digest {
        reasons.push("metrics not reproducible from stored weights".into());
    }

    if reasons.is_empty() {
        artifact.approved = true;
        Validation::Approved { artifact }
    } else {
        Validation::Rejected { artifact, reasons }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSet {
    pub forecast_id: String,
    pub cell_id: CellId,
    pub t_origin: Minute,
    pub horizon: usize,
    /// Rows are minutes `t_origin+1..=t_origin+horizon`, in KPI units.
    pub point: Vec<[f64; 4]>,
    pub lo: Vec<[f64; 4]>,
    pub hi: Vec<[f64; 4]>,
    pub model_id: String,
}

impl ForecastSet {
    pub fn max_of(&self, kpi: Kpi) -> f64 {
        self.point.iter().map(|r| r[kpi.index()]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn series(&self, kpi: Kpi) -> Vec<f64> {
        self.point.iter().map(|r| r[kpi.index()]).collect()
    }
}

/// Ten-step autoregressive forecast with widening residual intervals.
pub fn forecast_rollout(artifact: &ModelArtifact, window: &FeatureWindow) -> Result<ForecastSet> {
    if !artifact.is_approved() {
        return Err(Error::Unapproved(artifact.model_id.clone()));
    }
    if window.norm_ref != artifact.norm.id {
        return Err(Error::Invalid(format!(
            "window normalized with {} but model expects {}",
            window.norm_ref, artifact.norm.id
        )));
    }
    let point: Vec<[f64; 4]> = artifact
        .rollout_rows(window, HORIZON)
        .into_iter()
        .map(|r| artifact.norm.denormalize_row(r))
        .collect();
    let q = artifact.metrics.residual_q95;
    let width = |step: usize, i: usize| q[i] * ((step + 1) as f64).sqrt();
    let lo = point
        .iter()
        .enumerate()
        .map(|(s, r)| std::array::from_fn(|i| r[i] - width(s, i)))
        .collect();
    let hi = point
        .iter()
        .enumerate()
        .map(|(s, r)| std::array::from_fn(|i| r[i] + width(s, i)))
        .collect();
    Ok(ForecastSet {
        forecast_id: format!("fc-{}-{}", window.cell_id, window.t_end),
        cell_id: window.cell_id.clone(),
        t_origin: window.t_end,
        horizon: HORIZON,
        point,
        lo,
        hi,
        model_id: artifact.model_id.clone(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kpi::noise_draw;

    /// Pre-surge-like series: constant users, noisy continuous KPIs.
    pub fn noisy_series(n: u32, seed: u64) -> Vec<KpiSample> {
        let c = CellId::new("A");
        (0..n)
            .map(|t| KpiSample {
                t_min: t,
                cell_id: c.clone(),
                rrc_users: 120,
                thr_mbps: 97.3 + 1.0 * noise_draw(seed, &c, Kpi::Thr, t),
                prb_util: 0.46 + 0.01 * noise_draw(seed, &c, Kpi::Prb, t),
                sinr_db: 18.1 + 0.3 * noise_draw(seed, &c, Kpi::Sinr, t),
            })
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig { epochs: 400, ..TrainConfig::default() }
    }

    #[test]
    fn constant_series_fits_exactly() {
        let s: Vec<KpiSample> = noisy_series(100, 1)
            .into_iter()
            .map(|mut k| {
                k.thr_mbps = 90.0;
                k.prb_util = 0.5;
                k.sinr_db = 17.0;
                k
            })
            .collect();
        let out = train_model(&s, &quick()).unwrap();
        assert!(out.artifact.metrics.val_rmse.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn training_is_deterministic() {
        let s = noisy_series(100, 2);
        let a = train_model(&s, &quick()).unwrap();
        let b = train_model(&s, &quick()).unwrap();
        assert_eq!(a.artifact.weight_digest, b.artifact.weight_digest);
        assert_eq!(a.checkpoints.len(), 4);
    }

    #[test]
    fn too_few_windows() {
        assert!(matches!(
            train_model(&noisy_series(55, 3), &quick()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn divergence_returns_last_checkpoint() {
        let cfg = TrainConfig { learning_rate: 1e6, epochs: 50, checkpoint_every: 1, ..quick() };
        match train_model(&noisy_series(100, 4), &cfg) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch <= 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn beats_persistence_on_noise() {
        let out = tune_and_train(&noisy_series(100, 7), &TrainConfig::default(), &TuningGrid::default())
            .unwrap();
        let m = &out.artifact.metrics;
        for k in [Kpi::Thr, Kpi::Prb] {
            let i = k.index();
            assert!(m.val_rmse[i] < m.persistence_rmse[i], "{k}: {m:?}");
        }
        let v = validate_model(out.artifact, &out.validation, &out.holdout, &ValidatorConfig::default());
        assert!(v.is_approved(), "{:?}", v.reasons());
    }

    #[test]
    fn validator_rejections() {
        let out = train_model(&noisy_series(100, 6), &TrainConfig::default()).unwrap();
        let cfg = ValidatorConfig::default();

        // constant predictor on a trending series
        let trend: Vec<KpiSample> = (0..100)
            .map(|t| KpiSample {
                prb_util: 0.2 + 0.005 * t as f64,
                thr_mbps: 150.0 - 0.5 * t as f64,
                sinr_db: 22.0 - 0.05 * t as f64,
                ..noisy_series(100, 6)[t as usize].clone()
            })
            .collect();
        let level = TrainConfig { output_mode: OutputMode::Level, epochs: 1, ..TrainConfig::default() };
        let t_out = train_model(&trend, &level).unwrap();
        let mut zeroed = t_out.artifact.network.clone();
        let z = vec![0.0; zeroed.params().len()];
        zeroed.set_params(&z);
        let mut a = t_out.artifact.clone().with_network(zeroed);
        a.metrics = evaluate(&a, &t_out.validation);
        let v = validate_model(a, &t_out.validation, &t_out.holdout, &cfg);
        assert!(v.reasons().iter().any(|r| r.contains("worse than persistence")), "{:?}", v.reasons());

        // rollout blows up to ~10x the training range
        let mut net = out.artifact.network.clone();
        let last = net.layers.len() - 1;
        net.layers[last].biases = vec![1.0; 4];
        let mut a = out.artifact.clone().with_network(net);
        a.metrics = evaluate(&a, &out.validation);
        let v = validate_model(a, &out.validation, &out.holdout, &cfg);
        assert!(v.reasons().iter().any(|r| r.contains("instability")), "{:?}", v.reasons());

        // stale metrics
        let mut a = out.artifact.clone();
        a.metrics.val_rmse[2] *= 0.5;
        let v = validate_model(a, &out.validation, &out.holdout, &cfg);
        assert!(v.reasons().iter().any(|r| r.contains("reproducible")));
    }

    #[test]
    fn rollout_contract() {
        let out = train_model(&noisy_series(100, 7), &quick()).unwrap();
        let v = validate_model(out.artifact.clone(), &out.validation, &out.holdout, &ValidatorConfig::default());
        let Validation::Approved { artifact } = v else { panic!("{:?}", v.reasons()) };
        let w = &out.holdout[0].window;
        let f = forecast_rollout(&artifact, w).unwrap();
        assert_eq!(f.point.len(), HORIZON);
        assert_eq!(f.t_origin, w.t_end);
        for i in 0..4 {
            let widths: Vec<f64> = (0..HORIZON).map(|s| f.hi[s][i] - f.lo[s][i]).collect();
            assert!(widths.windows(2).all(|p| p[1] >= p[0]));
            for s in 0..HORIZON {
                assert!(f.lo[s][i] <= f.point[s][i] && f.point[s][i] <= f.hi[s][i]);
            }
        }
        assert!(matches!(forecast_rollout(&out.artifact, w), Err(Error::Unapproved(_))));
    }

    #[test]
    fn copy_last_row_is_a_fixed_point() {
        let out = train_model(&noisy_series(100, 8), &quick()).unwrap();
        let mut net = out.artifact.network.clone();
        let last = net.layers.len() - 1;
        net.layers[last].weights.iter_mut().for_each(|w| *w = 0.0);
        net.layers[last].biases.iter_mut().for_each(|b| *b = 0.0);
        let mut probe = out.artifact.clone().with_network(net);
        probe.approved = true;
        let mut w = out.holdout[0].window.clone();
        let row = w.values[0];
        w.values.iter_mut().for_each(|r| *r = row);
        let f = forecast_rollout(&probe, &w).unwrap();
        assert!(f.point.iter().all(|r| *r == f.point[0]));
        assert_eq!(f.point[0], probe.norm.denormalize_row(row));
    }
}
