use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::ModelParams;

/// How a check compares its statistic with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    /// Passes when `statistic < threshold` (residuals, errors, |z|-scores).
    Below,
    /// Passes when `statistic > threshold` (p-values, convergence orders).
    Above,
}

impl Semantics {
    pub fn passes(self, statistic: f64, threshold: f64) -> bool {
        match self {
            Semantics::Below => statistic < threshold,
            Semantics::Above => statistic > threshold,
        }
    }
}

/// Inputs of a check besides its seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

impl CheckParams {
    pub fn new(model: &ModelParams) -> Self {
        CheckParams {
            model: Some(model.clone()),
            ..Default::default()
        }
    }

    pub fn time(mut self, t: f64) -> Self {
        self.t.push(t);
        self
    }

    pub fn point(mut self, x: &[f64]) -> Self {
        self.x = x.to_vec();
        self
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckReport {
    pub check_id: String,
    pub params: CheckParams,
    pub statistic: f64,
    pub threshold: f64,
    pub semantics: Semantics,
    pub passed: bool,
    /// Wall-clock time; left out unless timings were requested, so that
    /// reports of reruns compare byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<u64>,
    /// Secondary measurements (per-level residuals, calibration constants, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckReport {
    /// A report whose `passed` flag is derived from `statistic`, `threshold`
    /// and `semantics`. A non-finite statistic fails and is stored as
    /// `f64::MAX` so that the report stays valid JSON.
    pub fn new(check_id: impl Into<String>, params: CheckParams, statistic: f64, threshold: f64, semantics: Semantics) -> Self {
        let finite = statistic.is_finite();
        let passed = finite && semantics.passes(statistic, threshold);
        let mut extra = BTreeMap::new();
        if !finite {
            extra.insert("nonfinite_statistic".to_string(), 1.0);
        }
        CheckReport {
            check_id: check_id.into(),
            params,
            statistic: if finite { statistic } else { f64::MAX },
            threshold,
            semantics,
            passed,
            runtime_ms: None,
            significance: None,
            sample_size: None,
            extra,
            error: None,
        }
    }

    /// A failed report for a check that could not be computed.
    pub fn failed(check_id: impl Into<String>, params: CheckParams, threshold: f64, semantics: Semantics, error: &crate::Error) -> Self {
        let mut r = CheckReport::new(check_id, params, f64::MAX, threshold, semantics);
        r.passed = false;
        r.error = Some(error.to_string());
        r
    }

    pub fn with_extra(mut self, key: &str, v: f64) -> Self {
        self.extra.insert(key.to_string(), if v.is_finite() { v } else { f64::MAX });
        self
    }

    pub fn with_sampling(mut self, significance: f64, sample_size: u64) -> Self {
        self.significance = Some(significance);
        self.sample_size = Some(sample_size);
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

/// Pass/fail counts of a report list.
pub fn tally(reports: &[CheckReport]) -> (usize, usize) {
    let passed = reports.iter().filter(|r| r.passed).count();
    (passed, reports.len() - passed)
}

/// Fixed-width summary table, one row per report.
pub fn summary_table(reports: &[CheckReport]) -> String {
    let width = reports.iter().map(|r| r.check_id.len()).max().unwrap_or(8).max(8);
    let mut out = format!("{:<width$}  {:>13}  {:>5}  {:>11}  {}\n", "check", "statistic", "", "threshold", "result");
    for r in reports {
        let op = match r.semantics {
            Semantics::Below => "<",
            Semantics::Above => ">",
        };
        out.push_str(&format!(
            "{:<width$}  {:>13.6e}  {:>5}  {:>11.3e}  {}\n",
            r.check_id,
            r.statistic,
            op,
            r.threshold,
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    let (p, f) = tally(reports);
    out.push_str(&format!("{p} passed, {f} failed\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn json_round_trip_is_lossless() {
        let model = ModelParams::with_standard_normal(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
            0.1 + 0.2,
            DVector::from_vec(vec![0.8, 0.0]),
        )
        .unwrap();
        let params = CheckParams::new(&model).time(0.25).point(&[0.0, 1.0 / 3.0]).value("eps", 1e-4);
        let r = CheckReport::new("pde/flux/003", params, std::f64::consts::PI * 1e-7, 1e-5, Semantics::Below)
            .with_extra("order", 1.9999999999999998)
            .with_sampling(0.001, 100_000);
        assert!(r.passed);
        let line = r.to_json_line();
        let back: CheckReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json_line(), line);
        assert!(!line.contains("runtime_ms"));
    }

    #[test]
    fn nonfinite_statistics_fail() {
        let r = CheckReport::new("x", CheckParams::default(), f64::NAN, 1.0, Semantics::Above);
        assert!(!r.passed);
        assert_eq!(r.statistic, f64::MAX);
        let back: CheckReport = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(back, r);
    }
}
