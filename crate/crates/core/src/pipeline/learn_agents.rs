//! Model training, validation gate, and forecasting.

use std::collections::BTreeMap;

use serde_json::json;

use crate::data::{build_windows, FeatureWindow, WINDOW_LEN};
use crate::error::Result;
use crate::kpi::{CellId, KpiSample, Minute};
use crate::learn::{forecast_rollout, validate_model, ModelArtifact, TrainConfig, TuningGrid, Validation, ValidatorConfig};
use crate::runtime::{Agent, AgentDescriptor, AgentMessage, MessageKind::*, TickCtx};

use super::ids::*;
use super::payload::{
    audit_note, ApprovedModelBody, CandidateBody, ControlBody, DriftBody, FeaturesBody, ForecastBody, ForecastRole,
};
use super::TrainingCache;

/// Trains one model per cell on request and retrains cells flagged by the
/// drift detector once enough post-change data has accumulated.
#[derive(Clone)]
pub struct Trainer {
    base: TrainConfig,
    grid: TuningGrid,
    retrain_min_minutes: Minute,
    cache: TrainingCache,
    history: BTreeMap<CellId, Vec<KpiSample>>,
    /// Hyperparameters picked by the tuner, reused on retraining.
    tuned: BTreeMap<CellId, TrainConfig>,
    /// Cell -> first minute of post-change data.
    pending: BTreeMap<CellId, Minute>,
}

impl Trainer {
    pub fn new(base: TrainConfig, grid: TuningGrid, retrain_min_minutes: Minute, cache: TrainingCache) -> Self {
        Trainer {
            base,
            grid,
            retrain_min_minutes,
            cache,
            history: BTreeMap::new(),
            tuned: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    fn send_candidate(
        &self,
        ctx: &mut TickCtx<'_>,
        out: crate::learn::TrainOutput,
        retrain: bool,
        window: (Minute, Minute),
    ) -> Result<()> {
        let a = &out.artifact;
        let note = audit_note(
            if retrain { "model_retrained" } else { "model_trained" },
            format!("{} trained on t={}..={} ({} checkpoints)", a.model_id, window.0, window.1, out.checkpoints.len()),
            json!({ "model_id": a.model_id, "cell_id": a.cell_id, "val_rmse": a.metrics.val_rmse,
                    "persistence_rmse": a.metrics.persistence_rmse, "config_digest": a.config_digest }),
        );
        ctx.send(AEA, Audit, &note)?;
        let body = CandidateBody { artifact: out.artifact, validation: out.validation, holdout: out.holdout, retrain };
        ctx.send(MVA, Model, &body)
    }
}

impl Agent for Trainer {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(MTA, &[Features, Control, DriftAlert], &[Model, Audit])
    }

    fn ready(&self, pending: &[&AgentMessage]) -> bool {
        !self.pending.is_empty() || pending.iter().any(|m| matches!(m.kind, Control | DriftAlert))
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        let mut requests = Vec::new();
        for m in inbox {
            match m.kind {
                Features => {
                    let f: FeaturesBody = m.payload_as()?;
                    for s in f.samples {
                        self.history.entry(s.cell_id.clone()).or_default().push(s);
                    }
                }
                Control => requests.push(m.payload_as::<ControlBody>()?),
                DriftAlert => {
                    let d: DriftBody = m.payload_as()?;
                    if d.retrain {
                        let since = d.decision.evidence.iter().map(|r| r.window_b.0).min().unwrap_or(d.t_min);
                        self.pending.entry(d.cell_id).or_insert(since);
                    }
                }
                _ => {}
            }
        }
        for req in requests {
            match req {
                ControlBody::Train { through } => {
                    for (cell, hist) in &self.history {
                        let series: Vec<KpiSample> = hist.iter().filter(|s| s.t_min <= through).cloned().collect();
                        match self.cache.get_or_train(&series, &self.base, &self.grid) {
                            Ok(out) => {
                                self.tuned.insert(cell.clone(), out.artifact.train_config.clone());
                                let from = series.first().map_or(0, |s| s.t_min);
                                self.send_candidate(ctx, out, false, (from, through))?;
                            }
                            Err(e) => {
                                let note = audit_note("training_failed", format!("{cell}: {e}"), json!({ "cell_id": cell }));
                                ctx.send(AEA, Audit, &note)?;
                            }
                        }
                    }
                }
                ControlBody::ModelRejected { cell_id, model_id, reasons } => {
                    let note = audit_note(
                        "candidate_rejected",
                        format!("{model_id} for {cell_id} rejected: {}", reasons.join("; ")),
                        json!({ "reasons": reasons }),
                    );
                    ctx.send(AEA, Audit, &note)?;
                }
                _ => {}
            }
        }
        let due: Vec<(CellId, Minute)> = self
            .pending
            .iter()
            .filter(|(_, &since)| ctx.t + 1 >= since + self.retrain_min_minutes)
            .map(|(c, &s)| (c.clone(), s))
            .collect();
        for (cell, since) in due {
            self.pending.remove(&cell);
            let series: Vec<KpiSample> = self
                .history
                .get(&cell)
                .map(|h| h.iter().filter(|s| s.t_min >= since).cloned().collect())
                .unwrap_or_default();
            let cfg = self.tuned.get(&cell).cloned().unwrap_or_else(|| self.base.clone());
            match crate::learn::train_model(&series, &cfg) {
                Ok(out) => self.send_candidate(ctx, out, true, (since, ctx.t))?,
                Err(e) => {
                    let note = audit_note("retrain_failed", format!("{cell}: {e}"), json!({ "cell_id": cell }));
                    ctx.send(AEA, Audit, &note)?;
                }
            }
        }
        Ok(())
    }

    fn checkpoint(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

/// Approves or rejects candidates; approved models go to every consumer.
#[derive(Debug, Clone)]
pub struct Validator {
    cfg: ValidatorConfig,
    approved: BTreeMap<CellId, String>,
}

impl Validator {
    pub fn new(cfg: ValidatorConfig) -> Self {
        Validator { cfg, approved: BTreeMap::new() }
    }

    pub fn approved(&self) -> &BTreeMap<CellId, String> {
        &self.approved
    }
}

impl Agent for Validator {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(MVA, &[Model], &[Model, Control, Audit])
    }

    fn ready(&self, pending: &[&AgentMessage]) -> bool {
        pending.iter().any(|m| m.kind == Model)
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        for m in inbox.into_iter().filter(|m| m.kind == Model && m.sender.as_str() == MTA) {
            let c: CandidateBody = m.payload_as()?;
            match validate_model(c.artifact, &c.validation, &c.holdout, &self.cfg) {
                Validation::Approved { artifact } => {
                    let note = audit_note(
                        "model_approved",
                        format!("{} approved for {}", artifact.model_id, artifact.cell_id),
                        json!({ "model_id": artifact.model_id, "retrain": c.retrain }),
                    );
                    ctx.send(AEA, Audit, &note)?;
                    self.approved.insert(artifact.cell_id.clone(), artifact.model_id.clone());
                    let body = ApprovedModelBody { artifact };
                    for to in [PA, DDA, PFA] {
                        ctx.send(to, Model, &body)?;
                    }
                }
                Validation::Rejected { artifact, reasons } => {
                    let note = audit_note(
                        "model_rejected",
                        format!("{} rejected: {}", artifact.model_id, reasons.join("; ")),
                        json!({ "model_id": artifact.model_id, "reasons": reasons }),
                    );
                    ctx.send(AEA, Audit, &note)?;
                    let ctl = ControlBody::ModelRejected {
                        cell_id: artifact.cell_id.clone(),
                        model_id: artifact.model_id.clone(),
                        reasons,
                    };
                    ctx.send(MTA, Control, &ctl)?;
                }
            }
        }
        Ok(())
    }

    fn checkpoint(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

/// Forecasts the triggered cell and its neighbors with their approved models.
#[derive(Debug, Clone)]
pub struct Predictor {
    cells: Vec<CellId>,
    models: BTreeMap<CellId, ModelArtifact>,
    windows: BTreeMap<CellId, FeatureWindow>,
    recent: BTreeMap<CellId, Vec<KpiSample>>,
}

impl Predictor {
    pub fn new(cells: Vec<CellId>) -> Self {
        Predictor { cells, models: BTreeMap::new(), windows: BTreeMap::new(), recent: BTreeMap::new() }
    }

    fn window_for(&self, cell: &CellId, model: &ModelArtifact) -> Result<FeatureWindow> {
        if let Some(w) = self.windows.get(cell).filter(|w| w.norm_ref == model.norm.id) {
            return Ok(w.clone());
        }
        let recent = self.recent.get(cell).map(Vec::as_slice).unwrap_or(&[]);
        let t_end = recent.last().map_or(0, |s| s.t_min);
        build_windows(recent, t_end, &model.norm)
    }
}

impl Agent for Predictor {
    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor::new(PA, &[Features, Model, Control], &[Forecast, Control, Audit])
    }

    fn ready(&self, pending: &[&AgentMessage]) -> bool {
        pending.iter().any(|m| m.kind == Control)
    }

    fn step(&mut self, ctx: &mut TickCtx<'_>, inbox: Vec<AgentMessage>) -> Result<()> {
        let mut triggers = Vec::new();
        for m in inbox {
            match m.kind {
                Model if m.sender.as_str() == MVA => {
                    let a: ApprovedModelBody = m.payload_as()?;
                    if a.artifact.is_approved() {
                        self.models.insert(a.artifact.cell_id.clone(), a.artifact);
                    }
                }
                Features => {
                    let f: FeaturesBody = m.payload_as()?;
                    for w in f.windows {
                        self.windows.insert(w.cell_id.clone(), w);
                    }
                    for s in f.samples {
                        let r = self.recent.entry(s.cell_id.clone()).or_default();
                        r.push(s);
                        if r.len() > WINDOW_LEN {
                            r.remove(0);
                        }
                    }
                }
                Control => {
                    if let ControlBody::Forecast { trigger } = m.payload_as()? {
                        triggers.push(trigger);
                    }
                }
                _ => {}
            }
        }
        for trig in triggers {
            let Some(source) = trig.scope.first().cloned() else { continue };
            let mut order = vec![(source.clone(), ForecastRole::Source)];
            order.extend(self.cells.iter().filter(|c| **c != source).map(|c| (c.clone(), ForecastRole::Neighbor)));
            let mut out = Vec::new();
            let mut failure = None;
            for (cell, role) in order {
                let res = match self.models.get(&cell) {
                    None => Err(crate::Error::Unapproved(format!("no approved model for {cell}"))),
                    Some(model) => self.window_for(&cell, model).and_then(|w| forecast_rollout(model, &w)),
                };
                match res {
                    Ok(forecast) => out.push(ForecastBody { trigger_id: trig.trigger_id.clone(), role, forecast }),
                    Err(e) => {
                        failure = Some(format!("{cell}: {e}"));
                        break;
                    }
                }
            }
            if let Some(reason) = failure {
                ctx.send(OA, Control, &ControlBody::NoForecast { trigger_id: trig.trigger_id.clone(), reason })?;
                continue;
            }
            for f in &out {
                ctx.send(PGA, Forecast, f)?;
                ctx.send(VA, Forecast, f)?;
            }
        }
        Ok(())
    }

    fn checkpoint(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}
