//! Distribution-shift tests on live telemetry and prediction residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpi::{CellId, Kpi, Minute};

pub const KS_MIN_SAMPLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    None,
    Mild,
    Severe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMethod {
    Ks,
    Cusum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub method: DriftMethod,
    pub kpi: Kpi,
    pub cell_id: CellId,
    pub statistic: f64,
    pub threshold: f64,
    pub severity: Severity,
    /// Minutes covered: the reference and the current sample for KS, the
    /// accumulation span for CUSUM.
    pub window_a: (Minute, Minute),
    pub window_b: (Minute, Minute),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub threshold: f64,
    pub severity: Severity,
}

/// Asymptotic two-sample critical coefficient, `sqrt(-ln(alpha/2) / 2)`.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

pub fn ks_threshold(n: usize, m: usize, alpha: f64) -> f64 {
    ks_coefficient(alpha) * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

fn grade(statistic: f64, threshold: f64, severe_multiple: f64) -> Severity {
    if statistic <= threshold {
        Severity::None
    } else if statistic <= severe_multiple * threshold {
        Severity::Mild
    } else {
        Severity::Severe
    }
}

/// Two-sample Kolmogorov–Smirnov statistic with a mild band up to 1.5x the
/// critical value.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    if a.len() < KS_MIN_SAMPLE || b.len() < KS_MIN_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "KS needs {KS_MIN_SAMPLE} values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Invalid("non-finite value in KS sample".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let threshold = ks_threshold(xs.len(), ys.len(), alpha);
    Ok(KsResult { statistic: d, threshold, severity: grade(d, threshold, 1.5) })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CusumState {
    pub s_pos: f64,
    /// Steps accumulated since the last reset.
    pub run: u32,
}

/// One-sided upper CUSUM update. Returns the new state and whether it alarmed;
/// an alarm resets the sum.
pub fn cusum_step(state: CusumState, z: f64, k: f64, h: f64) -> Result<(CusumState, bool)> {
    if !z.is_finite() {
        return Err(Error::Invalid(format!("non-finite CUSUM input {z}")));
    }
    let s = (state.s_pos + z - k).max(0.0);
    if s > h {
        Ok((CusumState::default(), true))
    } else {
        let run = if s > 0.0 { state.run + 1 } else { 0 };
        Ok((CusumState { s_pos: s, run }, false))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftAction {
    None,
    Monitor,
    Retrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDecision {
    pub action: DriftAction,
    /// Reports that justified the action, worst first.
    pub evidence: Vec<DriftReport>,
}

/// Severe KS drift or any CUSUM alarm asks for retraining; mild drift is
/// only recorded.
pub fn assess_drift(reports: &[DriftReport]) -> DriftDecision {
    let mut flagged: Vec<DriftReport> = reports.iter().filter(|r| r.severity != Severity::None).cloned().collect();
    flagged.sort_by_key(|r| std::cmp::Reverse(r.severity));
    let retrain = flagged
        .iter()
        .any(|r| r.severity == Severity::Severe || r.method == DriftMethod::Cusum);
    let action = if retrain {
        DriftAction::Retrain
    } else if flagged.is_empty() {
        DriftAction::None
    } else {
        DriftAction::Monitor
    };
    DriftDecision { action, evidence: flagged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Sup of |F_a - F_b| evaluated at every point of the merged sample.
    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        let cdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
        a.iter().chain(b).map(|&x| (cdf(a, x) - cdf(b, x)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn ks_examples() {
        let a: Vec<f64> = (1..=10).map(f64::from).collect();
        let r = ks_two_sample(&a, &a, 0.05).unwrap();
        assert_eq!((r.statistic, r.severity), (0.0, Severity::None));
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        let r = ks_two_sample(&a, &b, 0.05).unwrap();
        assert_eq!((r.statistic, r.severity), (1.0, Severity::Severe));
        // with 8 per side full separation only reaches the mild band
        let r = ks_two_sample(&a[..8], &b[..8], 0.05).unwrap();
        assert_eq!((r.statistic, r.severity), (1.0, Severity::Mild));
        assert!((ks_threshold(30, 30, 0.05) - 0.3506).abs() < 1e-4);
        assert!((ks_coefficient(0.05) - 1.358).abs() < 1e-3);
        assert!(ks_two_sample(&a[..7], &a, 0.05).is_err());
    }

    #[test]
    fn grading_bands() {
        assert_eq!(grade(0.3, 0.3, 1.5), Severity::None);
        assert_eq!(grade(0.449, 0.3, 1.5), Severity::Mild);
        assert_eq!(grade(0.451, 0.3, 1.5), Severity::Severe);
    }

    proptest! {
        #[test]
        fn ks_matches_brute_force(
            a in prop::collection::vec(0i32..12, 8..20),
            b in prop::collection::vec(0i32..12, 8..20),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = ks_two_sample(&a, &b, 0.05).unwrap();
            prop_assert!((r.statistic - brute_force(&a, &b)).abs() < 1e-12);
            prop_assert_eq!(r.severity != Severity::None, r.statistic > r.threshold);
        }

        #[test]
        fn cusum_alarm_time(z in 0.6f64..6.0, h in 1.0f64..10.0) {
            let k = 0.5;
            let mut s = CusumState::default();
            let mut steps = 0;
            loop {
                steps += 1;
                let (n, alarm) = cusum_step(s, z, k, h).unwrap();
                s = n;
                if alarm { break; }
                prop_assert!(steps < 1000);
            }
            // strict inequality: an exact multiple needs one more step
            let q = h / (z - k);
            let expected = if q.fract() == 0.0 { q as usize + 1 } else { q.ceil() as usize };
            prop_assert_eq!(steps, expected);
        }
    }

    #[test]
    fn cusum_examples() {
        let mut s = CusumState::default();
        for _ in 0..100 {
            let (n, alarm) = cusum_step(s, 0.0, 0.5, 5.0).unwrap();
            assert!(!alarm);
            assert_eq!(n.s_pos, 0.0);
            s = n;
        }
        let mut s = CusumState::default();
        let mut seen = vec![];
        for _ in 0..3 {
            let (n, alarm) = cusum_step(s, 3.0, 0.5, 5.0).unwrap();
            seen.push((n.s_pos, alarm));
            s = n;
        }
        assert_eq!(seen, vec![(2.5, false), (5.0, false), (0.0, true)]);
        let mut s = CusumState::default();
        for _ in 0..1000 {
            let (n, alarm) = cusum_step(s, 0.4, 0.5, 5.0).unwrap();
            assert!(!alarm);
            s = n;
        }
        assert!(cusum_step(s, f64::NAN, 0.5, 5.0).is_err());
    }

    fn report(method: DriftMethod, severity: Severity) -> DriftReport {
        DriftReport {
            method,
            kpi: Kpi::Prb,
            cell_id: CellId::new("B"),
            statistic: 1.0,
            threshold: 0.5,
            severity,
            window_a: (0, 9),
            window_b: (10, 19),
        }
    }

    #[test]
    fn drift_policy_table() {
        assert_eq!(assess_drift(&[report(DriftMethod::Ks, Severity::None)]).action, DriftAction::None);
        let d = assess_drift(&[report(DriftMethod::Ks, Severity::Mild)]);
        assert_eq!((d.action, d.evidence.len()), (DriftAction::Monitor, 1));
        assert_eq!(
            assess_drift(&[report(DriftMethod::Ks, Severity::Mild), report(DriftMethod::Ks, Severity::Severe)]).action,
            DriftAction::Retrain
        );
        assert_eq!(assess_drift(&[report(DriftMethod::Cusum, Severity::Severe)]).action, DriftAction::Retrain);
    }
}
