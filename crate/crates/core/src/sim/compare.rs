use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self as codes, Diagnostic};
use crate::expr::format_number;

use super::{compute_indicator, Indicator, IndicatorError, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub indicator: String,
    pub scenario: String,
    pub value: Option<f64>,
    pub delta_abs: Option<f64>,
    /// Absent when the baseline value is zero or absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("baseline scenario `{0}` is not among the runs")]
    NoBaseline(String),
    #[error("run `{0}` uses a different time grid than the baseline")]
    GridMismatch(String),
    #[error("run `{0}` comes from a different base model than the baseline")]
    LineageMismatch(String),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

impl CompareError {
    pub fn code(&self) -> &'static str {
        match self {
            CompareError::NoBaseline(_) => codes::E_NO_BASELINE,
            CompareError::GridMismatch(_) => codes::E_GRID_MISMATCH,
            CompareError::LineageMismatch(_) => codes::E_LINEAGE_MISMATCH,
            CompareError::Indicator(e) => e.code(),
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new(self.code(), self.to_string())
    }
}

/// Indicator values of every run relative to the baseline run.
pub fn compare_runs(
    runs: &[RunResult],
    baseline: &str,
    indicators: &[Indicator],
) -> Result<ComparisonTable, CompareError> {
    let base = runs
        .iter()
        .find(|r| r.scenario_name == baseline)
        .ok_or_else(|| CompareError::NoBaseline(baseline.to_string()))?;
    for r in runs {
        if r.model_fingerprint != base.model_fingerprint || r.model_id != base.model_id {
            return Err(CompareError::LineageMismatch(r.scenario_name.clone()));
        }
        if r.times != base.times || r.dt != base.dt {
            return Err(CompareError::GridMismatch(r.scenario_name.clone()));
        }
    }
    let mut inds: Vec<&Indicator> = indicators.iter().collect();
    inds.sort_by(|a, b| a.name.cmp(&b.name));
    let mut ordered: Vec<&RunResult> = runs.iter().collect();
    ordered.sort_by(|a, b| a.scenario_name.cmp(&b.scenario_name));

    let mut rows = Vec::new();
    for ind in inds {
        let b = compute_indicator(base, ind)?;
        for r in &ordered {
            let value = compute_indicator(r, ind)?;
            let delta_abs = value.zip(b).map(|(v, b)| v - b);
            let delta_rel = delta_abs
                .zip(b)
                .and_then(|(d, b)| (b != 0.0).then(|| d / b.abs()));
            rows.push(ComparisonRow {
                indicator: ind.name.clone(),
                scenario: r.scenario_name.clone(),
                value,
                delta_abs,
                delta_rel,
            });
        }
    }
    Ok(ComparisonTable {
        baseline: baseline.to_string(),
        rows,
    })
}

impl ComparisonTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Column-aligned text with six significant digits; absent cells print
    /// as `-`. Use [`ComparisonTable::to_json`] for exact values.
    pub fn to_text(&self) -> String {
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |v| format_number(significant(v, 6)));
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:+.2}%", v * 100.0));
        let mut table = vec![[
            "indicator".to_string(),
            "scenario".into(),
            "value".into(),
            "delta".into(),
            "delta %".into(),
        ]];
        for r in &self.rows {
            table.push([
                r.indicator.clone(),
                r.scenario.clone(),
                cell(r.value),
                cell(r.delta_abs),
                pct(r.delta_rel),
            ]);
        }
        let mut widths = [0usize; 5];
        for row in &table {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i < 2 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
        }
        out
    }
}

fn significant(v: f64, digits: i32) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let scale = 10f64.powi(digits - 1 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}
