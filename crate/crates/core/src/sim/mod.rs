//! Scenarios, the Euler engine, indicators and scenario comparison.

mod compare;
mod engine;
mod indicators;
mod scenario;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::DataError;
use crate::diagnostics::{self as codes, Diagnostic};

pub use compare::{compare_runs, CompareError, ComparisonRow, ComparisonTable};
pub use engine::{load_data, run, run_loaded, run_scenarios, LoadedData, RunResult};
pub use indicators::{compute_indicator, IndicatorError};
pub use scenario::{apply_scenario, check_scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Set { value: f64 },
    Scale { factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub target: String,
    pub at_time: f64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub interventions: Vec<Intervention>,
}

impl Scenario {
    pub const BASELINE: &'static str = "baseline";

    pub fn new(name: impl Into<String>) -> Self {
        Scenario {
            name: name.into(),
            description: String::new(),
            overrides: BTreeMap::new(),
            interventions: Vec::new(),
        }
    }

    /// The empty scenario.
    pub fn baseline() -> Self {
        Scenario::new(Self::BASELINE)
    }

    pub fn is_empty(&self) -> bool {
        self.overrides.is_empty() && self.interventions.is_empty()
    }

    pub fn with_override(mut self, constant: impl Into<String>, value: f64) -> Self {
        self.overrides.insert(constant.into(), value);
        self
    }

    pub fn with_intervention(
        mut self,
        target: impl Into<String>,
        at_time: f64,
        action: Action,
    ) -> Self {
        self.interventions.push(Intervention {
            target: target.into(),
            at_time,
            action,
        });
        self
    }

    /// Sort interventions by target then time.
    pub fn canonicalize(&mut self) {
        self.interventions.sort_by(|a, b| {
            a.target
                .cmp(&b.target)
                .then(a.at_time.total_cmp(&b.at_time))
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndicatorKind {
    FinalValue,
    Cumulative,
    Peak,
    Average,
    TimeToThreshold {
        threshold: f64,
        direction: Direction,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub target: String,
    #[serde(flatten)]
    pub kind: IndicatorKind,
}

impl Indicator {
    pub fn new(name: impl Into<String>, target: impl Into<String>, kind: IndicatorKind) -> Self {
        Indicator {
            name: name.into(),
            target: target.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("model has {} error(s); run aborted", errors(.0))]
    InvalidModel(Vec<Diagnostic>),
    #[error("scenario rejected: {}", first_message(.0))]
    Scenario(Vec<Diagnostic>),
    #[error("{code} in `{variable}` at t = {t}: {message}")]
    Eval {
        code: &'static str,
        variable: String,
        t: f64,
        message: String,
    },
    #[error("data for `{variable}`: {source}")]
    Data { variable: String, source: DataError },
}

fn errors(d: &[Diagnostic]) -> usize {
    d.iter().filter(|d| d.is_error()).count()
}

fn first_message(d: &[Diagnostic]) -> String {
    d.iter()
        .find(|d| d.is_error())
        .map(|d| d.to_string())
        .unwrap_or_default()
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::InvalidModel(_) => codes::E_INVALID_MODEL,
            SimError::Scenario(d) => d
                .iter()
                .find(|d| d.is_error())
                .and_then(|d| codes::lookup_code(&d.code))
                .map_or(codes::E_SCENARIO, |c| c.code),
            SimError::Eval { code, .. } => code,
            SimError::Data { source, .. } => source.code(),
        }
    }

    /// Everything worth showing to a user, as diagnostics.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            SimError::InvalidModel(d) | SimError::Scenario(d) => d.clone(),
            SimError::Eval { variable, .. } => {
                vec![Diagnostic::new(self.code(), self.to_string()).at_element(variable.as_str())]
            }
            SimError::Data { variable, source } => {
                vec![Diagnostic::new(source.code(), source.to_string())
                    .at_element(variable.as_str())]
            }
        }
    }
}

/// A scenario declared in the model, or the empty baseline when `name` is
/// `baseline` and the model declares no scenario of that name.
pub fn resolve_scenario(model: &crate::model::Model, name: &str) -> Result<Scenario, Diagnostic> {
    match model.scenario(name) {
        Some(s) => Ok(s.clone()),
        None if name == Scenario::BASELINE => Ok(Scenario::baseline()),
        None => Err(Diagnostic::new(
            codes::E_NO_SCENARIO,
            format!("model declares no scenario `{name}`"),
        )),
    }
}

/// Every declared scenario, preceded by the empty baseline when the model
/// does not declare one.
pub fn all_scenarios(model: &crate::model::Model) -> Vec<Scenario> {
    let mut list = Vec::with_capacity(model.scenarios.len() + 1);
    if model.scenario(Scenario::BASELINE).is_none() {
        list.push(Scenario::baseline());
    }
    list.extend(model.scenarios.iter().cloned());
    list
}
