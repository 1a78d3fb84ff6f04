use crate::diagnostics::{self as codes, Diagnostic};

use super::{Direction, Indicator, IndicatorKind, RunResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run `{scenario}` has no series `{series}`")]
pub struct IndicatorError {
    pub scenario: String,
    pub series: String,
}

impl IndicatorError {
    pub fn code(&self) -> &'static str {
        codes::E_UNKNOWN_SERIES
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new(self.code(), self.to_string()).at_element(self.series.as_str())
    }
}

/// Scalar summary of one series. `None` only for a threshold never reached.
pub fn compute_indicator(
    run: &RunResult,
    indicator: &Indicator,
) -> Result<Option<f64>, IndicatorError> {
    let values = run
        .series(&indicator.target)
        .ok_or_else(|| IndicatorError {
            scenario: run.scenario_name.clone(),
            series: indicator.target.clone(),
        })?;
    // left rectangles over t_start .. t_stop - dt
    let cumulative = || {
        values[..values.len() - 1]
            .iter()
            .map(|v| v * run.dt)
            .sum::<f64>()
    };
    Ok(match indicator.kind {
        IndicatorKind::FinalValue => values.last().copied(),
        IndicatorKind::Cumulative => Some(cumulative()),
        IndicatorKind::Peak => values.iter().copied().reduce(f64::max),
        IndicatorKind::Average => Some(cumulative() / (run.t_stop - run.t_start)),
        IndicatorKind::TimeToThreshold {
            threshold,
            direction,
        } => values
            .iter()
            .position(|&v| match direction {
                Direction::Rising => v >= threshold,
                Direction::Falling => v <= threshold,
            })
            .map(|n| run.times[n]),
    })
}
