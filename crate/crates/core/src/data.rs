//! Telemetry ingestion, cleaning, and feature windows.
//!
//! Ingestion maps the many names and units a KPI shows up under onto the
//! canonical four, aligns timestamps to the minute grid, and records what it
//! had to reject or guess. Cleaning fills gaps and tags anomalies without
//! touching observed values. Windows are 10x4 min-max normalized blocks.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kpi::{CellId, Kpi, KpiSample, Minute};

pub const WINDOW_LEN: usize = 10;

/// Minimum rolling history before outlier tagging kicks in.
const OUTLIER_MIN_HISTORY: usize = 10;
/// Consecutive identical readings after which a varying KPI counts as stuck.
const STUCK_RUN: usize = 30;

/// One raw telemetry reading as it arrives from a connector or CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    /// Timestamp in minutes; fractional values are snapped to the grid.
    pub t: f64,
    pub cell: String,
    pub kpi: String,
    pub value: f64,
    #[serde(default)]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestRecord {
    /// Value violated a KPI invariant and was dropped.
    Rejected { t: Minute, cell: CellId, kpi: String, value: f64, reason: String },
    /// A (t, cell, kpi) reading arrived twice; the later one won.
    Duplicate { t: Minute, cell: CellId, kpi: Kpi },
    /// Minute with no complete sample for the cell.
    Gap { t: Minute, cell: CellId },
    UnknownKpi { name: String },
    UnknownUnit { kpi: Kpi, unit: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub samples: Vec<KpiSample>,
    pub records: Vec<IngestRecord>,
}

/// Canonical KPI for a (case-insensitive) name alias.
///
/// | KPI  | accepted names |
/// |------|----------------|
/// | rrc  | rrc, rrc_users, rrc_connected_users, rrc_conn_users, rrc.connmean, connected_users |
/// | thr  | thr, thr_mbps, throughput, ip_throughput, dl_throughput, drb.ipthpdl |
/// | prb  | prb, prb_util, dl_prb_util, prb_utilization, rru.prbuseddl |
/// | sinr | sinr, sinr_db, dl_sinr |
pub fn canonical_kpi(name: &str) -> Option<Kpi> {
    let n = name.trim().to_ascii_lowercase();
    let kpi = match n.as_str() {
        "rrc" | "rrc_users" | "rrc_connected_users" | "rrc_conn_users" | "rrc.connmean"
        | "connected_users" => Kpi::Rrc,
        "thr" | "thr_mbps" | "throughput" | "ip_throughput" | "dl_throughput" | "drb.ipthpdl" => {
            Kpi::Thr
        }
        "prb" | "prb_util" | "dl_prb_util" | "prb_utilization" | "rru.prbuseddl" => Kpi::Prb,
        "sinr" | "sinr_db" | "dl_sinr" => Kpi::Sinr,
        _ => return None,
    };
    Some(kpi)
}

/// Multiplier taking `unit` to the canonical unit of `kpi`.
pub fn unit_factor(kpi: Kpi, unit: Option<&str>) -> Option<f64> {
    let u = unit.map(|u| u.trim().to_ascii_lowercase());
    let u = u.as_deref().unwrap_or("");
    match (kpi, u) {
        (Kpi::Rrc, "" | "count" | "users" | "ue") => Some(1.0),
        (Kpi::Thr, "" | "mbps" | "mbit/s") => Some(1.0),
        (Kpi::Thr, "kbps" | "kbit/s") => Some(1e-3),
        (Kpi::Thr, "gbps" | "gbit/s") => Some(1e3),
        (Kpi::Thr, "bps" | "bit/s") => Some(1e-6),
        (Kpi::Prb, "" | "fraction" | "ratio") => Some(1.0),
        (Kpi::Prb, "percent" | "%" | "pct") => Some(1e-2),
        (Kpi::Sinr, "" | "db") => Some(1.0),
        _ => None,
    }
}

pub fn rows_from_samples(samples: &[KpiSample]) -> Vec<RawRow> {
    samples
        .iter()
        .flat_map(|s| {
            Kpi::ALL.iter().map(move |&k| RawRow {
                t: s.t_min as f64,
                cell: s.cell_id.to_string(),
                kpi: k.name().to_string(),
                value: s.get(k),
                unit: None,
            })
        })
        .collect()
}

/// Validates and canonicalizes raw rows into complete per-minute samples.
pub fn ingest_telemetry(rows: &[RawRow]) -> Ingested {
    let mut records = Vec::new();
    let mut grid: BTreeMap<(CellId, Minute), [Option<f64>; 4]> = BTreeMap::new();

    for row in rows {
        let Some(kpi) = canonical_kpi(&row.kpi) else {
            records.push(IngestRecord::UnknownKpi { name: row.kpi.clone() });
            continue;
        };
        let Some(factor) = unit_factor(kpi, row.unit.as_deref()) else {
            records.push(IngestRecord::UnknownUnit {
                kpi,
                unit: row.unit.clone().unwrap_or_default(),
            });
            continue;
        };
        let cell = CellId::new(row.cell.trim());
        let t_round = row.t.round();
        let value = row.value * factor;
        if !(t_round >= 0.0 && t_round.is_finite()) {
            records.push(IngestRecord::Rejected {
                t: 0,
                cell,
                kpi: kpi.name().into(),
                value: row.t,
                reason: "timestamp outside the minute grid".into(),
            });
            continue;
        }
        let t = t_round as Minute;
        let reject = |reason: &str| IngestRecord::Rejected {
            t,
            cell: cell.clone(),
            kpi: kpi.name().into(),
            value,
            reason: reason.into(),
        };
        let valid = value.is_finite()
            && match kpi {
                Kpi::Prb => (0.0..=1.0).contains(&value),
                Kpi::Thr => value >= 0.0,
                Kpi::Rrc => value >= 0.0 && value.fract() == 0.0,
                Kpi::Sinr => true,
            };
        if !valid {
            records.push(reject("value outside the KPI's valid range"));
            continue;
        }
        let slot = &mut grid.entry((cell.clone(), t)).or_insert([None; 4])[kpi.index()];
        if slot.is_some() {
            records.push(IngestRecord::Duplicate { t, cell, kpi });
        }
        *slot = Some(value);
    }

    let mut samples = Vec::new();
    let mut span: BTreeMap<CellId, (Minute, Minute)> = BTreeMap::new();
    let mut present: BTreeMap<CellId, Vec<Minute>> = BTreeMap::new();
    for ((cell, t), vals) in &grid {
        if let [Some(rrc), Some(thr), Some(prb), Some(sinr)] = *vals {
            samples.push(KpiSample {
                t_min: *t,
                cell_id: cell.clone(),
                rrc_users: rrc as u32,
                thr_mbps: thr,
                prb_util: prb,
                sinr_db: sinr,
            });
            present.entry(cell.clone()).or_default().push(*t);
        }
        let e = span.entry(cell.clone()).or_insert((*t, *t));
        e.0 = e.0.min(*t);
        e.1 = e.1.max(*t);
    }
    for (cell, (lo, hi)) in span {
        let have = present.get(&cell).cloned().unwrap_or_default();
        for t in lo..=hi {
            if have.binary_search(&t).is_err() {
                records.push(IngestRecord::Gap { t, cell: cell.clone() });
            }
        }
    }
    samples.sort_by(|a, b| (a.t_min, &a.cell_id).cmp(&(b.t_min, &b.cell_id)));
    Ingested { samples, records }
}

/// Parses a wide CSV whose header names KPIs by any accepted alias.
///
/// A column may carry its unit in brackets, e.g. `DL_PRB_UTIL[percent]`.
/// The time column is `t`, `time`, or `minute`; the cell column `cell` or
/// `cell_id`. The netsim telemetry CSV is accepted as-is.
pub fn rows_from_csv(text: &str) -> Result<Vec<RawRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Csv { line: 1, reason: "empty file".into() })?;
    let mut t_col = None;
    let mut cell_col = None;
    let mut kpi_cols: Vec<(usize, String, Option<String>)> = Vec::new();
    for (i, h) in header.split(',').enumerate() {
        let h = h.trim();
        match h.to_ascii_lowercase().as_str() {
            "t" | "time" | "minute" => t_col = Some(i),
            "cell" | "cell_id" => cell_col = Some(i),
            _ => {
                let (name, unit) = match h.split_once('[') {
                    Some((n, u)) => (n.to_string(), Some(u.trim_end_matches(']').to_string())),
                    None => (h.to_string(), None),
                };
                kpi_cols.push((i, name, unit));
            }
        }
    }
    let (t_col, cell_col) = match (t_col, cell_col) {
        (Some(t), Some(c)) => (t, c),
        _ => {
            return Err(Error::Csv {
                line: 1,
                reason: "header needs a time and a cell column".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |reason: String| Error::Csv { line: n + 2, reason };
        let t: f64 = cols
            .get(t_col)
            .ok_or_else(|| err("missing time".into()))?
            .parse()
            .map_err(|e: std::num::ParseFloatError| err(e.to_string()))?;
        let cell = cols.get(cell_col).ok_or_else(|| err("missing cell".into()))?;
        for (i, name, unit) in &kpi_cols {
            let Some(raw) = cols.get(*i) else { continue };
            if raw.is_empty() {
                continue;
            }
            let value: f64 = raw.parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?;
            rows.push(RawRow {
                t,
                cell: cell.to_string(),
                kpi: name.clone(),
                value,
                unit: unit.clone(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyReason {
    Outlier,
    MissingFilled,
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyTag {
    pub cell_id: CellId,
    pub t_min: Minute,
    pub kpi: Kpi,
    pub z_score: f64,
    pub reason: AnomalyReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanerConfig {
    pub outlier_z: f64,
    pub rolling_window: usize,
    /// Rolling sd is floored at this fraction of |rolling mean|.
    pub relative_sd_floor: f64,
}

impl Default for CleanerConfig {
    fn default() -> Self {
        CleanerConfig {
            outlier_z: 4.0,
            rolling_window: 30,
            relative_sd_floor: 0.05,
        }
    }
}

/// Incremental per-cell cleaner. Gaps are filled when the next observation
/// arrives: a single missing minute is interpolated, longer runs carry the
/// last observation forward and are tagged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cleaner {
    cell: CellId,
    cfg: CleanerConfig,
    series: Vec<KpiSample>,
    /// Indices into `series` of observed (not imputed) samples.
    observed: Vec<bool>,
    stuck_run: [usize; 4],
    varied: [bool; 4],
}

impl Cleaner {
    pub fn new(cell: CellId, cfg: CleanerConfig) -> Self {
        Cleaner {
            cell,
            cfg,
            series: Vec::new(),
            observed: Vec::new(),
            stuck_run: [0; 4],
            varied: [false; 4],
        }
    }

    pub fn series(&self) -> &[KpiSample] {
        &self.series
    }

    pub fn last_t(&self) -> Option<Minute> {
        self.series.last().map(|s| s.t_min)
    }

    /// Adds an observation; returns the samples appended (fills then the
    /// observation itself) and any anomaly tags.
    pub fn push(&mut self, s: KpiSample) -> Result<(Vec<KpiSample>, Vec<AnomalyTag>)> {
        if s.cell_id != self.cell {
            return Err(Error::Invalid(format!("sample for {} fed to cleaner of {}", s.cell_id, self.cell)));
        }
        if let Some(last) = self.last_t() {
            if s.t_min <= last {
                return Err(Error::Invalid(format!("sample t={} not after t={last}", s.t_min)));
            }
        }
        let mut tags = Vec::new();
        let mut appended = Vec::new();
        if let Some(prev) = self.series.last().cloned() {
            let gap = s.t_min - prev.t_min - 1;
            for k in 1..=gap {
                let t = prev.t_min + k;
                let fill = if gap == 1 {
                    interpolate(&prev, &s, t)
                } else {
                    for kpi in Kpi::ALL {
                        tags.push(AnomalyTag {
                            cell_id: self.cell.clone(),
                            t_min: t,
                            kpi,
                            z_score: 0.0,
                            reason: AnomalyReason::MissingFilled,
                        });
                    }
                    KpiSample { t_min: t, ..prev.clone() }
                };
                self.series.push(fill.clone());
                self.observed.push(false);
                appended.push(fill);
            }
        }
        tags.extend(self.tag_outliers(&s));
        tags.extend(self.tag_stuck(&s));
        self.series.push(s.clone());
        self.observed.push(true);
        appended.push(s);
        Ok((appended, tags))
    }

    fn tag_outliers(&self, s: &KpiSample) -> Vec<AnomalyTag> {
        let hist: Vec<&KpiSample> = self
            .series
            .iter()
            .zip(&self.observed)
            .rev()
            .filter(|(_, o)| **o)
            .take(self.cfg.rolling_window)
            .map(|(s, _)| s)
            .collect();
        if hist.len() < OUTLIER_MIN_HISTORY {
            return Vec::new();
        }
        let mut tags = Vec::new();
        for kpi in Kpi::ALL {
            let xs: Vec<f64> = hist.iter().map(|h| h.get(kpi)).collect();
            let (mean, sd) = mean_sd(&xs);
            let sd = sd.max(self.cfg.relative_sd_floor * mean.abs()).max(1e-9);
            let z = (s.get(kpi) - mean) / sd;
            if z.abs() > self.cfg.outlier_z {
                tags.push(AnomalyTag {
                    cell_id: self.cell.clone(),
                    t_min: s.t_min,
                    kpi,
                    z_score: z,
                    reason: AnomalyReason::Outlier,
                });
            }
        }
        tags
    }

    fn tag_stuck(&mut self, s: &KpiSample) -> Vec<AnomalyTag> {
        let Some(prev) = self.series.last() else {
            return Vec::new();
        };
        let mut tags = Vec::new();
        for kpi in [Kpi::Thr, Kpi::Prb, Kpi::Sinr] {
            let i = kpi.index();
            if s.get(kpi) == prev.get(kpi) {
                self.stuck_run[i] += 1;
                if self.varied[i] && self.stuck_run[i] + 1 == STUCK_RUN {
                    tags.push(AnomalyTag {
                        cell_id: self.cell.clone(),
                        t_min: s.t_min,
                        kpi,
                        z_score: 0.0,
                        reason: AnomalyReason::Stuck,
                    });
                }
            } else {
                self.varied[i] = true;
                self.stuck_run[i] = 0;
            }
        }
        tags
    }
}

fn interpolate(a: &KpiSample, b: &KpiSample, t: Minute) -> KpiSample {
    let w = (t - a.t_min) as f64 / (b.t_min - a.t_min) as f64;
    let lerp = |x: f64, y: f64| x + (y - x) * w;
    KpiSample {
        t_min: t,
        cell_id: a.cell_id.clone(),
        rrc_users: lerp(a.rrc_users as f64, b.rrc_users as f64).round() as u32,
        thr_mbps: lerp(a.thr_mbps, b.thr_mbps),
        prb_util: lerp(a.prb_util, b.prb_util),
        sinr_db: lerp(a.sinr_db, b.sinr_db),
    }
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Batch cleaning of one cell's sorted samples.
pub fn clean_and_impute(
    samples: &[KpiSample],
    cfg: CleanerConfig,
) -> Result<(Vec<KpiSample>, Vec<AnomalyTag>)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InsufficientData("series has no observations".into()))?;
    let mut cleaner = Cleaner::new(first.cell_id.clone(), cfg);
    let mut tags = Vec::new();
    for s in samples {
        let (_, t) = cleaner.push(s.clone())?;
        tags.extend(t);
    }
    Ok((cleaner.series, tags))
}

/// Min-max statistics from the training period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub id: String,
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl NormStats {
    pub fn fit(samples: &[KpiSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no samples for normalization".into()));
        }
        let mut min = [f64::INFINITY; 4];
        let mut max = [f64::NEG_INFINITY; 4];
        for s in samples {
            for (i, v) in s.values().into_iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        let mut h = Sha256::new();
        for v in min.iter().chain(max.iter()) {
            h.update(v.to_le_bytes());
        }
        let id = format!("norm-{}", &hex::encode(h.finalize())[..12]);
        Ok(NormStats { id, min, max })
    }

    /// A KPI that never varied during training carries no scale.
    pub fn is_degenerate(&self, i: usize) -> bool {
        self.max[i] - self.min[i] <= 1e-9 * self.max[i].abs().max(1.0)
    }

    /// Normalization scale; degenerate KPIs use unit scale (raw offsets).
    pub fn range(&self, i: usize) -> f64 {
        if self.is_degenerate(i) {
            1.0
        } else {
            self.max[i] - self.min[i]
        }
    }

    pub fn normalize(&self, i: usize, x: f64) -> f64 {
        (x - self.min[i]) / self.range(i)
    }

    pub fn denormalize(&self, i: usize, y: f64) -> f64 {
        self.min[i] + y * self.range(i)
    }

    pub fn normalize_row(&self, row: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| self.normalize(i, row[i]))
    }

    pub fn denormalize_row(&self, row: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| self.denormalize(i, row[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub cell_id: CellId,
    pub t_end: Minute,
    /// Rows are minutes `t_end-9..=t_end`; columns rrc, thr, prb, sinr.
    pub values: Vec<[f64; 4]>,
    pub norm_ref: String,
}

impl FeatureWindow {
    /// Row-major (minute-major) flattening.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flat_map(|r| r.iter().copied()).collect()
    }
}

/// Builds the window ending at `t_end` from a gap-free series.
pub fn build_windows(series: &[KpiSample], t_end: Minute, norm: &NormStats) -> Result<FeatureWindow> {
    let end = series
        .iter()
        .position(|s| s.t_min == t_end)
        .ok_or_else(|| Error::InsufficientData(format!("no sample at t={t_end}")))?;
    if end + 1 < WINDOW_LEN {
        return Err(Error::InsufficientData(format!(
            "window ending at t={t_end} needs {WINDOW_LEN} minutes of history"
        )));
    }
    let rows = &series[end + 1 - WINDOW_LEN..=end];
    for (k, s) in rows.iter().enumerate() {
        if s.t_min + (WINDOW_LEN - 1 - k) as Minute != t_end {
            return Err(Error::Invalid("series has gaps; clean it first".into()));
        }
    }
    let values: Vec<[f64; 4]> = rows.iter().map(|s| norm.normalize_row(s.values())).collect();
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite window entry".into()));
    }
    Ok(FeatureWindow {
        cell_id: rows[0].cell_id.clone(),
        t_end,
        values,
        norm_ref: norm.id.clone(),
    })
}

/// Every window of a gap-free series, in time order.
pub fn all_windows(series: &[KpiSample], norm: &NormStats) -> Result<Vec<FeatureWindow>> {
    series
        .iter()
        .skip(WINDOW_LEN - 1)
        .map(|s| build_windows(series, s.t_min, norm))
        .collect()
}
