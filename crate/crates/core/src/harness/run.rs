//! Scenario files and the `run` command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::{aggregate, DeploymentSummary, RunReport};
use super::svg::{line_chart, Trace};
use crate::error::{Error, Result};
use crate::kpi::{CellId, Kpi};
use crate::netsim::{run_scenario, EvalWindow, ScenarioConfig, TelemetryLog};
use crate::pipeline::{AgentPipeline, Mode, PipelineConfig, TrainingCache};
use crate::runtime::WireTransport;

/// Scenario JSON: simulator fields at the top level plus an optional
/// `pipeline` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario file: {e}")))?;
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.pipeline.validate()
    }

    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.scenario.seed = s;
        }
        self
    }

    pub fn neighbor(&self) -> &CellId {
        &self.scenario.neighbor().cell_id
    }
}

/// Telemetry of one mode plus the agent loop that produced it, if any.
pub struct ModeRun {
    pub mode: Mode,
    pub log: TelemetryLog,
    pub pipeline: Option<AgentPipeline>,
}

pub fn run_mode(file: &ScenarioFile, mode: Mode, cache: &TrainingCache, wire: bool) -> Result<ModeRun> {
    let abort = |a: crate::netsim::Aborted| a.error;
    if mode == Mode::Baseline {
        let log = run_scenario(file.scenario.clone(), None).map_err(abort)?;
        return Ok(ModeRun { mode, log, pipeline: None });
    }
    let transport: Option<Box<dyn crate::runtime::Transport>> = if wire {
        Some(Box::new(WireTransport::loopback()?))
    } else {
        None
    };
    let mut p = AgentPipeline::new(&file.scenario, &file.pipeline, mode, cache.clone(), transport)?;
    let log = run_scenario(file.scenario.clone(), Some(&mut p)).map_err(abort)?;
    Ok(ModeRun { mode, log, pipeline: Some(p) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub wire: bool,
}

fn summarize(run: &ModeRun) -> DeploymentSummary {
    let Some(p) = &run.pipeline else {
        return DeploymentSummary {
            policy_id: None,
            verdict: None,
            status: None,
            fraction: None,
            rationale: "baseline run: no controller attached".into(),
        };
    };
    let verdict = p.decisions().iter().find(|d| d["type"] == "verdict").map(|d| &d["verdict"]);
    let last = p.deployments().last();
    let rationale = match (verdict, last) {
        (Some(v), _) => v["rationale"].as_str().unwrap_or_default().to_string(),
        (None, Some(r)) => r.reason.clone(),
        (None, None) => "no policy reached the deployer".into(),
    };
    DeploymentSummary {
        policy_id: last.map(|r| r.policy_id.clone()),
        verdict: verdict.and_then(|v| v["decision"].as_str()).map(str::to_string),
        status: last.map(|r| serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()),
        fraction: last.map(|r| r.directive.fraction),
        rationale,
    }
}

/// Series of one KPI of one cell.
pub fn kpi_series(log: &TelemetryLog, cell: &CellId, kpi: Kpi) -> Vec<(f64, f64)> {
    log.for_cell(cell).map(|s| (s.t_min as f64, s.get(kpi))).collect()
}

/// Writes one overlay chart per cell and KPI; returns the file names.
pub fn write_overlays(
    dir: &Path,
    cells: [&CellId; 2],
    window: EvalWindow,
    runs: &[(String, &TelemetryLog)],
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for (role, cell) in [("target", cells[0]), ("neighbor", cells[1])] {
        for kpi in Kpi::ALL {
            let traces: Vec<Trace> = runs
                .iter()
                .map(|(label, log)| Trace { label: label.clone(), points: kpi_series(log, cell, kpi) })
                .collect();
            let title = format!("{} {} ({role})", cell, kpi.name());
            let name = PathBuf::from(format!("{prefix}{role}_{}.svg", kpi.name()));
            fs::write(dir.join(&name), line_chart(&title, kpi.name(), &traces, Some(window)))?;
            out.push(name);
        }
    }
    Ok(out)
}

/// Runs the requested mode, plus the other two for the overlay charts, and
/// writes every artifact into `out`.
pub fn cmd_run(scenario: &Path, opts: &RunOptions, out: &Path) -> Result<RunReport> {
    let file = ScenarioFile::load(scenario)?.with_seed(opts.seed);
    fs::create_dir_all(out)?;
    let cache = TrainingCache::default();
    let main = run_mode(&file, opts.mode, &cache, opts.wire)?;
    let mut others = Vec::new();
    for m in Mode::ALL.into_iter().filter(|m| *m != opts.mode) {
        others.push(run_mode(&file, m, &cache, false)?);
    }

    let mut artifacts = vec![PathBuf::from("telemetry.csv"), PathBuf::from("decisions.jsonl"), PathBuf::from("audit.jsonl")];
    main.log.write_csv(&out.join("telemetry.csv"))?;
    let (decisions, audit, transcript, audit_len) = match &main.pipeline {
        Some(p) => {
            let mut d = String::new();
            for v in p.decisions() {
                d.push_str(&serde_json::to_string(v)?);
                d.push('\n');
            }
            (d, p.audit_log().to_jsonl(), Some(p.transcript_digest()), p.audit_log().len())
        }
        None => (String::new(), String::new(), None, 0),
    };
    fs::write(out.join("decisions.jsonl"), decisions)?;
    fs::write(out.join("audit.jsonl"), audit)?;

    let mut all: Vec<&ModeRun> = others.iter().collect();
    all.push(&main);
    all.sort_by_key(|r| Mode::ALL.iter().position(|m| *m == r.mode));
    let traces: Vec<(String, &TelemetryLog)> = all.iter().map(|r| (r.mode.to_string(), &r.log)).collect();
    let cells = [&file.scenario.target_cell, file.neighbor()];
    artifacts.extend(write_overlays(out, cells, file.scenario.eval_window, &traces, "")?);

    // aggregates come from the CSV as written, not from memory
    let csv = TelemetryLog::read_csv(&out.join("telemetry.csv"))?;
    artifacts.push(PathBuf::from("report.md"));
    artifacts.push(PathBuf::from("run.json"));
    let report = RunReport {
        scenario: file.scenario.name.clone(),
        scenario_digest: file.digest()?,
        mode: opts.mode,
        seed: file.scenario.seed,
        eval_window: file.scenario.eval_window,
        target_cell: file.scenario.target_cell.clone(),
        cells: aggregate(&csv, file.scenario.eval_window),
        deployment: summarize(&main),
        telemetry_digest: csv.digest(),
        transcript_digest: transcript,
        audit_entries: audit_len,
        artifacts,
    };
    fs::write(out.join("report.md"), report.to_markdown())?;
    fs::write(out.join("run.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}
