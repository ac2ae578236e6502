//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

use ranassure_core::assure::audit::verify_chain;
use ranassure_core::assure::baseline::{fit_local_model, FitConfig};
use ranassure_core::assure::drift::{ks_two_sample, DriftMethod, Severity};
use ranassure_core::harness::{
    aggregate, calibrate, cmd_run, reference_scenario, run_mode, CalibrationTargets, CellAggregates, RunOptions,
    ScenarioFile,
};
use ranassure_core::kpi::{CellId, CellParams, Kpi, KpiSample, NoiseSd};
use ranassure_core::learn::mlp::Mlp;
use ranassure_core::learn::model::{evaluate, tune_and_train, validate_model};
use ranassure_core::netsim::{surge_extra, TelemetryLog};
use ranassure_core::pipeline::{Mode, TrainingCache};
use ranassure_core::runtime::{FaultPlan, MessageKind, TamperPlan};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&mut Ctx) -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(drift: bool) -> ScenarioFile {
    reference_scenario(drift).expect("shipped scenario parses")
}

fn cell_agg<'a>(aggs: &'a [CellAggregates], cell: &CellId) -> Result<&'a CellAggregates, String> {
    aggs.iter().find(|a| &a.cell_id == cell).ok_or_else(|| format!("no aggregates for {cell}"))
}

/// Independent conservation oracle over a full telemetry log.
fn conservation_violation(file: &ScenarioFile, log: &TelemetryLog) -> Option<String> {
    let initial: u32 = file.scenario.cells.iter().map(|c| c.initial_rrc).sum();
    let mut per_minute: BTreeMap<u32, u32> = BTreeMap::new();
    for s in &log.samples {
        *per_minute.entry(s.t_min).or_default() += s.rrc_users;
    }
    if per_minute.len() != file.scenario.duration_min as usize {
        return Some(format!("{} minutes logged", per_minute.len()));
    }
    per_minute.into_iter().find_map(|(t, total)| {
        let want = initial + surge_extra(&file.scenario.surge, t);
        (total != want).then(|| format!("t={t}: total {total} != {want}"))
    })
}

struct Ctx {
    cache: TrainingCache,
    tmp: tempfile::TempDir,
    drift_run: Option<PathBuf>,
}

impl Ctx {
    fn dir(&self, name: &str) -> PathBuf {
        self.tmp.path().join(name)
    }
}

fn determinism(ctx: &mut Ctx) -> Outcome {
    let path = root().join("scenarios/surge_drift.json");
    let opts = RunOptions { mode: Mode::Agentic, seed: None, wire: false };
    let mut times = Vec::new();
    let mut dirs = Vec::new();
    for name in ["run-1", "run-2"] {
        let out = ctx.dir(name);
        let start = Instant::now();
        cmd_run(&path, &opts, &out).map_err(|e| e.to_string())?;
        times.push(start.elapsed());
        dirs.push(out);
    }
    let csv = |d: &Path| std::fs::read(d.join("telemetry.csv")).map_err(|e| e.to_string());
    ensure!(csv(&dirs[0])? == csv(&dirs[1])?, "telemetry.csv differs between identical runs");
    let digest = |d: &Path| -> Result<String, String> {
        let v: Value = serde_json::from_slice(&std::fs::read(d.join("run.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        Ok(v["transcript_digest"].as_str().unwrap_or_default().to_string())
    };
    let (a, b) = (digest(&dirs[0])?, digest(&dirs[1])?);
    ensure!(!a.is_empty() && a == b, "transcript digests differ: {a} vs {b}");
    let slowest = times.iter().max().copied().unwrap_or_default();
    ensure!(slowest < Duration::from_secs(10), "run took {:.2} s", slowest.as_secs_f64());
    ctx.drift_run = Some(dirs.remove(0));
    Ok(format!(
        "byte-identical telemetry, transcript {}, runs {:.2} s / {:.2} s",
        &a[..12],
        times[0].as_secs_f64(),
        times[1].as_secs_f64()
    ))
}

fn no_agent_reproduction(ctx: &mut Ctx) -> Outcome {
    let text = std::fs::read_to_string(root().join("scenarios/reference_targets.json")).map_err(|e| e.to_string())?;
    let targets: CalibrationTargets = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let (fitted, cal) = calibrate(&targets, &scenario(true)).map_err(|e| e.to_string())?;
    let w = fitted.scenario.eval_window;
    let run = |m| run_mode(&fitted, m, &ctx.cache, false).map(|r| aggregate(&r.log, w)).map_err(|e| e.to_string());
    let (base, na) = (run(Mode::Baseline)?, run(Mode::NoAgent)?);
    let (tc, nc) = (&fitted.scenario.target_cell, fitted.neighbor());
    let (tb, tn, nb, nn) = (cell_agg(&base, tc)?, cell_agg(&na, tc)?, cell_agg(&base, nc)?, cell_agg(&na, nc)?);

    ensure!((tb.mean_rrc - 175.1).abs() <= 8.0, "baseline target rrc {:.1}", tb.mean_rrc);
    ensure!((tn.mean_rrc - 157.1).abs() <= 8.0, "no-agent target rrc {:.1}", tn.mean_rrc);
    ensure!(tn.mean_rrc < tb.mean_rrc, "target rrc does not fall");
    ensure!((tb.mean_thr - 59.9).abs() <= 0.1 * 59.9, "baseline target thr {:.2}", tb.mean_thr);
    ensure!((tn.mean_thr - 72.4).abs() <= 0.1 * 72.4, "no-agent target thr {:.2}", tn.mean_thr);
    ensure!(tn.mean_thr > tb.mean_thr, "target thr does not rise");
    ensure!((tb.mean_prb - 0.671).abs() <= 0.05, "baseline target prb {:.3}", tb.mean_prb);
    ensure!((tn.mean_prb - 0.598).abs() <= 0.05, "no-agent target prb {:.3}", tn.mean_prb);
    ensure!(tn.mean_prb < tb.mean_prb, "target prb does not fall");
    ensure!(nn.mean_prb > nb.mean_prb && nn.mean_prb >= 0.55, "neighbor prb {:.3} -> {:.3}", nb.mean_prb, nn.mean_prb);
    let gain = tn.mean_sinr - tb.mean_sinr;
    ensure!((gain - 1.14).abs() <= 0.5, "target sinr gain {gain:.2} dB");
    ensure!(nn.mean_thr < nb.mean_thr, "neighbor thr does not degrade");
    ensure!(nn.mean_sinr < nb.mean_sinr, "neighbor sinr does not degrade");

    let off: Vec<String> = cal.residuals.iter().filter(|r| !r.within).map(|r| format!("{} {:+.3}", r.name, r.residual)).collect();
    Ok(format!(
        "rrc {:.1}->{:.1}, thr {:.1}->{:.1}, prb {:.3}->{:.3}, neighbor prb {:.3}->{:.3}, sinr {gain:+.2} dB; residuals outside tolerance: {}",
        tb.mean_rrc, tn.mean_rrc, tb.mean_thr, tn.mean_thr, tb.mean_prb, tn.mean_prb, nb.mean_prb, nn.mean_prb,
        if off.is_empty() { "none".to_string() } else { off.join(", ") }
    ))
}

fn agentic_blocks_drift(ctx: &mut Ctx) -> Outcome {
    let dir = ctx.drift_run.clone().ok_or("determinism run missing")?;
    let text = std::fs::read_to_string(dir.join("decisions.jsonl")).map_err(|e| e.to_string())?;
    let verdicts: Vec<Value> = text
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .filter(|v| v["type"] == "verdict")
        .collect();
    ensure!(!verdicts.is_empty(), "no verdict in decisions.jsonl");
    let v = &verdicts[0]["verdict"];
    ensure!(v["decision"] == "rejected", "verdict {}", v["decision"]);
    let check = v["checks"]
        .as_array()
        .and_then(|cs| cs.iter().find(|c| c["name"] == "neighbor_prb_max"))
        .ok_or("no neighbor PRB check")?;
    let value = check["value"].as_f64().unwrap_or(0.0);
    ensure!(check["pass"] == false && value >= 0.85, "neighbor check {check}");
    let rationale = v["rationale"].as_str().unwrap_or_default();
    ensure!(rationale.contains("PRB"), "rationale {rationale:?}");

    let t_decision = v["t_min"].as_u64().ok_or("verdict without t_min")? as u32;
    let agentic = TelemetryLog::read_csv(&dir.join("telemetry.csv")).map_err(|e| e.to_string())?;
    let base = run_mode(&scenario(true), Mode::Baseline, &ctx.cache, false).map_err(|e| e.to_string())?.log;
    let after = |l: &TelemetryLog| l.samples.iter().filter(|s| s.t_min >= t_decision).cloned().collect::<Vec<_>>();
    let (a, b) = (after(&agentic), after(&base));
    ensure!(!a.is_empty() && a == b, "post-decision telemetry differs from baseline");
    Ok(format!("rejected at t={t_decision}, simulated neighbor PRB {value:.3}; {} post-decision samples match baseline", a.len()))
}

fn agentic_approves_without_drift(ctx: &mut Ctx) -> Outcome {
    let file = scenario(false);
    let w = file.scenario.eval_window;
    let agentic = run_mode(&file, Mode::Agentic, &ctx.cache, false).map_err(|e| e.to_string())?;
    let base = run_mode(&file, Mode::Baseline, &ctx.cache, false).map_err(|e| e.to_string())?;
    let p = agentic.pipeline.as_ref().ok_or("agentic run without pipeline")?;
    let verdict = p
        .decisions()
        .iter()
        .find(|d| d["type"] == "verdict")
        .ok_or("no verdict")?;
    ensure!(verdict["verdict"]["decision"] == "approved", "verdict {}", verdict["verdict"]["rationale"]);
    let dep = p.deployments().first().ok_or("nothing deployed")?;
    ensure!(dep.verified && dep.events.iter().any(|(_, e)| e.starts_with("installed")), "deployment {:?}", dep.status);
    let tc = &file.scenario.target_cell;
    let (a, b) = (aggregate(&agentic.log, w), aggregate(&base.log, w));
    let gain = cell_agg(&b, tc)?.mean_prb - cell_agg(&a, tc)?.mean_prb;
    ensure!(gain >= 0.05, "target PRB improves by only {gain:.3}");
    Ok(format!("approved and deployed {}, target PRB improves by {gain:.3}", dep.policy_id))
}

fn drift_detection(ctx: &mut Ctx) -> Outcome {
    const DRIFT_AT: u32 = 138;
    let file = scenario(true);
    let nc = file.neighbor().clone();
    let run = run_mode(&file, Mode::Agentic, &ctx.cache, false).map_err(|e| e.to_string())?;
    let p = run.pipeline.as_ref().ok_or("agentic run without pipeline")?;

    let ks = p.drift_reports().iter().find(|r| {
        r.method == DriftMethod::Ks
            && r.cell_id == nc
            && r.kpi == Kpi::Prb
            && r.severity == Severity::Severe
            && r.window_a.1 < DRIFT_AT
            && (r.window_b.0..=r.window_b.1).contains(&DRIFT_AT)
    });
    let ks = ks.ok_or("no severe KS report on neighbor PRB straddling the drift")?;

    // independent check on the windows split exactly at the drift minute
    let prb: Vec<f64> = run.log.for_cell(&nc).map(|s| s.prb_util).collect();
    let at = DRIFT_AT as usize;
    let split = ks_two_sample(&prb[at - 30..at], &prb[at..at + 30], 0.05).map_err(|e| e.to_string())?;
    ensure!(split.severity == Severity::Severe, "KS across t={DRIFT_AT}: {split:?}");

    let alarms: Vec<u32> = p
        .drift_reports()
        .iter()
        .filter(|r| r.method == DriftMethod::Cusum && r.cell_id == nc)
        .map(|r| r.window_b.1)
        .collect();
    let first = alarms.iter().copied().find(|t| *t >= DRIFT_AT).ok_or("no CUSUM alarm after the drift")?;
    ensure!(first <= DRIFT_AT + 15, "first CUSUM alarm at t={first}");
    let early = alarms.iter().filter(|t| **t < DRIFT_AT).count();

    let t_retrain = p
        .decisions()
        .iter()
        .filter(|d| d["type"] == "drift_alert" && d["cell_id"] == nc.as_str() && d["decision"]["action"] == "retrain")
        .filter_map(|d| d["t_min"].as_u64().map(|t| t as u32))
        .find(|t| *t >= DRIFT_AT)
        .ok_or("no retrain decision for the neighbor")?;
    let mta = "MTA".into();
    let retrain = p
        .orchestrator()
        .bus()
        .transcript()
        .iter()
        .find(|e| e.recipient == mta && e.kind == MessageKind::DriftAlert && e.accepted && e.t_min == t_retrain)
        .ok_or("no neighbor retrain request delivered to MTA")?;
    Ok(format!(
        "KS severe at D={:.3} (windows {:?}/{:?}), split KS D={:.3}; CUSUM alarm at t={first} ({early} before drift); retrain request {} at t={}",
        ks.statistic, ks.window_a, ks.window_b, split.statistic, retrain.msg_id, retrain.t_min
    ))
}

fn validator_gate(ctx: &mut Ctx) -> Outcome {
    let file = scenario(true);
    let base = run_mode(&file, Mode::Baseline, &ctx.cache, false).map_err(|e| e.to_string())?;
    let tc = &file.scenario.target_cell;
    let pre: Vec<KpiSample> = base.log.for_cell(tc).filter(|s| s.t_min < file.pipeline.train_until).cloned().collect();
    let out = tune_and_train(&pre, &file.pipeline.train, &file.pipeline.grid).map_err(|e| e.to_string())?;
    let cfg = file.pipeline.validator;

    let m = out.artifact.metrics.clone();
    for k in [Kpi::Thr, Kpi::Prb] {
        let i = k.index();
        ensure!(m.val_rmse[i] < m.persistence_rmse[i], "{k}: val rmse {} vs persistence {}", m.val_rmse[i], m.persistence_rmse[i]);
    }
    let clean = validate_model(out.artifact.clone(), &out.validation, &out.holdout, &cfg);
    ensure!(clean.is_approved(), "clean artifact rejected: {:?}", clean.reasons());

    // weight noise, with digest and metrics honestly recomputed so only quality can fail it
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.5).expect("valid sd");
    let mut net = out.artifact.network.clone();
    let noisy: Vec<f64> = net.params().iter().map(|w| w + noise.sample(&mut rng)).collect();
    net.set_params(&noisy);
    let mut corrupted = out.artifact.clone().with_network(net);
    corrupted.metrics = evaluate(&corrupted, &out.validation);
    let v = validate_model(corrupted, &out.validation, &out.holdout, &cfg);
    ensure!(!v.is_approved(), "noise-corrupted artifact approved");
    Ok(format!(
        "clean thr rmse {:.3} < {:.3}, prb rmse {:.4} < {:.4}; corrupted rejected: {}",
        m.val_rmse[Kpi::Thr.index()],
        m.persistence_rmse[Kpi::Thr.index()],
        m.val_rmse[Kpi::Prb.index()],
        m.persistence_rmse[Kpi::Prb.index()],
        v.reasons().first().map(String::as_str).unwrap_or("")
    ))
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

fn numerical_checks(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // MLP gradients vs central differences
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let dims = [rng.gen_range(2..6), rng.gen_range(2..6), rng.gen_range(1..5)];
        let mut net = Mlp::new(&dims, rng.gen());
        let mut p = net.params();
        p.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        net.set_params(&p);
        let n = rng.gen_range(1..5);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<Vec<f64>> = (0..n).map(|_| (0..dims[2]).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut mask: Vec<bool> = (0..dims[2]).map(|_| rng.gen_bool(0.7)).collect();
        mask[0] = true;
        let (_, g) = net.loss_and_grad(&xs, &ys, &mask);
        let analytic = Mlp::flat_grad(&g);
        let h = 1e-5;
        for j in 0..p.len() {
            let mut probe = net.clone();
            let mut q = p.clone();
            q[j] = p[j] + h;
            probe.set_params(&q);
            let up = probe.loss_and_grad(&xs, &ys, &mask).0;
            q[j] = p[j] - h;
            probe.set_params(&q);
            let down = probe.loss_and_grad(&xs, &ys, &mask).0;
            let e = rel_err(analytic[j], (up - down) / (2.0 * h));
            ensure!(e <= 1e-4, "instance {inst} param {j}: analytic {} vs numeric {}", analytic[j], (up - down) / (2.0 * h));
            worst = worst.max(e);
        }
    }

    // KS statistic vs brute-force sup over the pooled sample
    for case in 0..100 {
        let (n, m) = (rng.gen_range(8..16), rng.gen_range(8..16));
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0..6) as f64 + 0.5 * rng.gen_range(0..2) as f64).collect();
        let cdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
        let brute = a.iter().chain(&b).map(|&x| (cdf(&a, x) - cdf(&b, x)).abs()).fold(0.0, f64::max);
        let got = ks_two_sample(&a, &b, 0.05).map_err(|e| e.to_string())?.statistic;
        ensure!((got - brute).abs() < 1e-12, "case {case}: {got} vs {brute}");
    }

    // local baseline fit on noiseless linear data
    let (ppu, slope, cap, eff) = (0.0041, 14.2, 180.0, 0.87);
    let cell = CellId::new("x");
    let samples: Vec<KpiSample> = (0..40u32)
        .map(|t| {
            let rrc = 60 + 2 * t;
            let prb = 0.05 + ppu * rrc as f64;
            KpiSample {
                t_min: t,
                cell_id: cell.clone(),
                rrc_users: rrc,
                thr_mbps: cap * eff * (1.0 - prb),
                prb_util: prb,
                sinr_db: 24.0 - slope * prb,
            }
        })
        .collect();
    let prior = CellParams {
        capacity_mbps: cap,
        nominal_rrc: 100,
        prb_per_ue: 0.003,
        prb_idle: 0.0,
        sinr_ref_db: 25.0,
        sinr_slope_db: 10.0,
        efficiency: 0.9,
        noise_sd: NoiseSd::default(),
    };
    let fit = fit_local_model(&samples, &cell, &prior, &FitConfig::default()).map_err(|e| e.to_string())?;
    ensure!((fit.prb.slope - ppu).abs() < 1e-9, "prb slope {}", fit.prb.slope);
    ensure!((fit.sinr.slope + slope).abs() < 1e-9, "sinr slope {}", fit.sinr.slope);
    ensure!((fit.thr.slope + cap * eff).abs() < 1e-9, "thr slope {}", fit.thr.slope);
    Ok(format!("20 MLP gradient checks (worst rel err {worst:.1e}), 100 KS cases, exact slope recovery"))
}

fn resilience(ctx: &mut Ctx) -> Outcome {
    let mut file = scenario(true);
    let at = file.pipeline.schedule.first().copied().ok_or("no scheduled trigger")?;
    file.pipeline.faults.push(FaultPlan { agent: "PA".into(), at_t: at, failures: 1 });
    let run = run_mode(&file, Mode::Agentic, &ctx.cache, false).map_err(|e| e.to_string())?;
    ensure!(run.log.samples.len() == file.scenario.cells.len() * file.scenario.duration_min as usize, "run incomplete");
    let p = run.pipeline.as_ref().ok_or("agentic run without pipeline")?;
    let rec = p
        .tick_reports()
        .iter()
        .flat_map(|r| &r.recoveries)
        .find(|r| r.agent.as_str() == "PA")
        .ok_or("no recovery action for PA")?;
    ensure!(rec.recovered && rec.t_min == at, "recovery {rec:?}");
    let entry = p
        .audit_log()
        .entries()
        .iter()
        .find(|e| e.kind == "recovery" && e.body["agent"] == "PA")
        .ok_or("no recovery audit entry")?;
    ensure!(p.decisions().iter().any(|d| d["type"] == "verdict"), "no verdict after recovery");
    Ok(format!("PA failed at t={at}, restarted {} time(s), replayed {}; audit #{}: {}", rec.restarts, rec.replayed, entry.seq, entry.rationale))
}

fn security_and_audit(ctx: &mut Ctx) -> Outcome {
    let mut file = scenario(true);
    let at = 50;
    file.pipeline.tampers.push(TamperPlan { at_t: at, kind: MessageKind::Telemetry });
    let run = run_mode(&file, Mode::Agentic, &ctx.cache, false).map_err(|e| e.to_string())?;
    let p = run.pipeline.as_ref().ok_or("agentic run without pipeline")?;
    let rejected: Vec<_> = p.tick_reports().iter().flat_map(|r| &r.rejected).collect();
    ensure!(rejected.len() == 1, "{} rejected messages", rejected.len());
    let id = &rejected[0].msg_id;
    let logged = p.audit_log().entries().iter().find(|e| e.kind == "integrity_reject" && e.body["msg_id"] == id.as_str());
    let logged = logged.ok_or("rejection not in audit log")?;
    let in_transcript = p.orchestrator().bus().transcript().iter().any(|e| &e.msg_id == id && !e.accepted);
    ensure!(in_transcript, "rejection not in transcript");

    let entries = p.audit_log().entries().to_vec();
    ensure!(verify_chain(&entries).is_ok(), "untouched chain fails verification");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let k = rng.gen_range(0..entries.len());
        let mut mutated = entries.clone();
        mutated[k].rationale.push('!');
        ensure!(verify_chain(&mutated) == Err(k), "mutation at {k} reported as {:?}", verify_chain(&mutated));
    }
    Ok(format!("{id} rejected ({}), audit #{}; chain of {} entries localizes 5 mutations", rejected[0].reason, logged.seq, entries.len()))
}

fn conservation(ctx: &mut Ctx) -> Outcome {
    use proptest::prelude::*;
    use proptest::test_runner::{Config, TestRunner};

    let file = scenario(true);
    let mut runner = TestRunner::new(Config { cases: 6, failure_persistence: None, ..Config::default() });
    let cache = ctx.cache.clone();
    let strategy = (0u64..1_000_000, prop::sample::select(Mode::ALL.to_vec()), any::<bool>());
    runner
        .run(&strategy, |(seed, mode, drift)| {
            let f = if drift { file.clone() } else { scenario(false) }.with_seed(Some(seed));
            let run = run_mode(&f, mode, &cache, false).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if let Some(v) = conservation_violation(&f, &run.log) {
                return Err(TestCaseError::fail(format!("seed {seed} {mode}: {v}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let mut checked = 6;
    if let Some(dir) = &ctx.drift_run {
        let log = TelemetryLog::read_csv(&dir.join("telemetry.csv")).map_err(|e| e.to_string())?;
        if let Some(v) = conservation_violation(&file, &log) {
            return Err(format!("reference agentic run: {v}"));
        }
        checked += 1;
    }
    Ok(format!("{checked} full runs conserve total RRC every minute"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("determinism and runtime", determinism),
        ("no-agent reproduction", no_agent_reproduction),
        ("agentic blocking under drift", agentic_blocks_drift),
        ("agentic approval without drift", agentic_approves_without_drift),
        ("drift detection", drift_detection),
        ("model validation gate", validator_gate),
        ("numerical checks", numerical_checks),
        ("resilience", resilience),
        ("security and audit", security_and_audit),
        ("conservation", conservation),
    ];
    let mut ctx = Ctx { cache: TrainingCache::default(), tmp: tempfile::tempdir().expect("tempdir"), drift_run: None };
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check(&mut ctx) {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
