//! Exogenous time series, lookup tables and CSV ingestion.
//!
//! CSV dialect: comma separated, `.` decimal point, first non-comment row is
//! the header, lines starting with `#` are comments. Rows are never sorted or
//! resampled on load.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics as codes;
use crate::expr::format_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Hold,
    #[default]
    Linear,
}

impl Interpolation {
    pub fn as_str(self) -> &'static str {
        match self {
            Interpolation::Hold => "hold",
            Interpolation::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    #[default]
    Error,
    HoldEnds,
}

impl Extrapolation {
    pub fn as_str(self) -> &'static str {
        match self {
            Extrapolation::Error => "error",
            Extrapolation::HoldEnds => "hold_ends",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("{path}: line {line}: {message}")]
    CsvParse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: line {line}: time {time} does not increase")]
    NonMonotonicTime { path: String, line: u64, time: f64 },
    #[error("{path}: column `{column}` not found in header")]
    MissingColumn { path: String, column: String },
    #[error("{path}: no data rows")]
    Empty { path: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(
        "series `{series}` has no value at t={t} (range {first}..{last}, extrapolation error)"
    )]
    Range {
        series: String,
        t: f64,
        first: f64,
        last: f64,
    },
}

impl DataError {
    pub fn code(&self) -> &'static str {
        match self {
            DataError::CsvParse { .. } => codes::E_CSV_PARSE,
            DataError::NonMonotonicTime { .. } => codes::E_NONMONOTONIC_TIME,
            DataError::MissingColumn { .. } => codes::E_MISSING_COLUMN,
            DataError::Empty { .. } => codes::E_EMPTY,
            DataError::Io { .. } => codes::E_IO,
            DataError::Range { .. } => codes::E_DATA_RANGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub interp: Interpolation,
    #[serde(default)]
    pub extrapolation: Extrapolation,
}

impl TimeSeries {
    /// Checks length and strict monotonicity; the error carries the index of
    /// the first offending point.
    pub fn new(
        id: impl Into<String>,
        times: Vec<f64>,
        values: Vec<f64>,
        interp: Interpolation,
        extrapolation: Extrapolation,
    ) -> Result<Self, String> {
        if times.is_empty() {
            return Err("series has no points".into());
        }
        if times.len() != values.len() {
            return Err(format!("{} times but {} values", times.len(), values.len()));
        }
        if let Some(i) = (1..times.len()).find(|&i| !(times[i] > times[i - 1])) {
            return Err(format!("time {} at index {i} does not increase", times[i]));
        }
        Ok(TimeSeries {
            id: id.into(),
            times,
            values,
            interp,
            extrapolation,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value at `t` under the series' interpolation and extrapolation policy.
    pub fn sample(&self, t: f64) -> Result<f64, DataError> {
        let first = self.times[0];
        let last = self.times[self.times.len() - 1];
        if t < first || t > last {
            return match self.extrapolation {
                Extrapolation::HoldEnds if t < first => Ok(self.values[0]),
                Extrapolation::HoldEnds => Ok(self.values[self.values.len() - 1]),
                Extrapolation::Error => Err(DataError::Range {
                    series: self.id.clone(),
                    t,
                    first,
                    last,
                }),
            };
        }
        // index of the greatest time <= t
        let i = self.times.partition_point(|&x| x <= t) - 1;
        if self.times[i] == t || self.interp == Interpolation::Hold {
            return Ok(self.values[i]);
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    /// Render as CSV in the accepted dialect.
    pub fn to_csv(&self, time_column: &str, value_column: &str) -> String {
        let mut out = format!("{time_column},{value_column}\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format_number(*t));
            out.push(',');
            out.push_str(&format_number(*v));
            out.push('\n');
        }
        out
    }
}

/// Piecewise-linear table with held ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub id: String,
    /// `(x, y)` pairs with strictly increasing x.
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub doc: String,
}

impl LookupTable {
    pub fn new(id: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        LookupTable {
            id: id.into(),
            points,
            doc: String::new(),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.points.len() < 2 {
            return Err(format!("lookup `{}` needs at least two points", self.id));
        }
        if self
            .points
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(format!("lookup `{}` has a non-finite point", self.id));
        }
        if self.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(format!(
                "lookup `{}` x values must strictly increase",
                self.id
            ));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        lookup_eval(self, x)
    }
}

pub fn lookup_eval(table: &LookupTable, x: f64) -> f64 {
    let pts = &table.points;
    let Some(&(x_first, y_first)) = pts.first() else {
        return f64::NAN;
    };
    let (x_last, y_last) = pts[pts.len() - 1];
    if x <= x_first {
        return y_first;
    }
    if x >= x_last {
        return y_last;
    }
    let i = pts.partition_point(|p| p.0 <= x) - 1;
    let (x0, y0) = pts[i];
    if x0 == x {
        return y0;
    }
    let (x1, y1) = pts[i + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Where an exogenous variable's values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DataSource {
    /// A CSV file, path relative to the model file.
    File {
        path: String,
        #[serde(default = "default_time_column")]
        time_column: String,
        column: String,
    },
    /// Points written directly in the model.
    Inline { points: Vec<(f64, f64)> },
}

fn default_time_column() -> String {
    "t".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataBinding {
    pub source: DataSource,
    #[serde(default)]
    pub interp: Interpolation,
    #[serde(default)]
    pub extrapolation: Extrapolation,
}

impl DataBinding {
    pub fn file(path: impl Into<String>, column: impl Into<String>) -> Self {
        DataBinding {
            source: DataSource::File {
                path: path.into(),
                time_column: default_time_column(),
                column: column.into(),
            },
            interp: Interpolation::Linear,
            extrapolation: Extrapolation::Error,
        }
    }

    pub fn inline(points: Vec<(f64, f64)>) -> Self {
        DataBinding {
            source: DataSource::Inline { points },
            interp: Interpolation::Linear,
            extrapolation: Extrapolation::Error,
        }
    }

    /// Identifier of the bound series: `path#column` for files.
    pub fn series_id(&self, variable: &str) -> String {
        match &self.source {
            DataSource::File { path, column, .. } => format!("{path}#{column}"),
            DataSource::Inline { .. } => format!("inline#{variable}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub interp: Interpolation,
    pub extrapolation: Extrapolation,
}

/// Read a series from a CSV file on disk.
pub fn load_series(
    path: &Path,
    time_column: &str,
    value_column: &str,
    options: &LoadOptions,
) -> Result<TimeSeries, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_series_csv(
        &path.display().to_string(),
        &text,
        time_column,
        value_column,
        options,
    )
}

/// Parse CSV text; `name` labels errors and becomes the series id prefix.
pub fn parse_series_csv(
    name: &str,
    text: &str,
    time_column: &str,
    value_column: &str,
    options: &LoadOptions,
) -> Result<TimeSeries, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(name, &e))?.clone();
    let col = |c: &str| {
        headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| DataError::MissingColumn {
                path: name.to_string(),
                column: c.to_string(),
            })
    };
    let tcol = col(time_column)?;
    let vcol = col(value_column)?;

    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(name, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize, what: &str| -> Result<f64, DataError> {
            let raw = record.get(i).unwrap_or("");
            if raw.is_empty() {
                return Err(DataError::CsvParse {
                    path: name.to_string(),
                    line,
                    message: format!("missing {what} value"),
                });
            }
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::CsvParse {
                    path: name.to_string(),
                    line,
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        if record.len() != headers.len() {
            return Err(DataError::CsvParse {
                path: name.to_string(),
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let t = cell(tcol, time_column)?;
        let v = cell(vcol, value_column)?;
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(DataError::NonMonotonicTime {
                    path: name.to_string(),
                    line,
                    time: t,
                });
            }
        }
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(DataError::Empty {
            path: name.to_string(),
        });
    }
    Ok(TimeSeries {
        id: format!("{name}#{value_column}"),
        times,
        values,
        interp: options.interp,
        extrapolation: options.extrapolation,
    })
}

fn csv_error(name: &str, e: &csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    DataError::CsvParse {
        path: name.to_string(),
        line,
        message: e.to_string(),
    }
}

/// Supplies series for file-backed data bindings.
pub trait DataResolver {
    fn resolve(&self, variable: &str, binding: &DataBinding) -> Result<TimeSeries, DataError>;
}

fn options_of(binding: &DataBinding) -> LoadOptions {
    LoadOptions {
        interp: binding.interp,
        extrapolation: binding.extrapolation,
    }
}

fn inline_series(
    variable: &str,
    binding: &DataBinding,
    points: &[(f64, f64)],
) -> Result<TimeSeries, DataError> {
    let (times, values) = points.iter().copied().unzip();
    TimeSeries::new(
        binding.series_id(variable),
        times,
        values,
        binding.interp,
        binding.extrapolation,
    )
    .map_err(|message| DataError::CsvParse {
        path: binding.series_id(variable),
        line: 0,
        message,
    })
}

/// Reads files relative to a base directory.
#[derive(Debug, Clone)]
pub struct FsResolver {
    pub base_dir: PathBuf,
}

impl FsResolver {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        FsResolver {
            base_dir: base_dir.into(),
        }
    }
}

impl DataResolver for FsResolver {
    fn resolve(&self, variable: &str, binding: &DataBinding) -> Result<TimeSeries, DataError> {
        match &binding.source {
            DataSource::Inline { points } => inline_series(variable, binding, points),
            DataSource::File {
                path,
                time_column,
                column,
            } => {
                let mut s = load_series(
                    &self.base_dir.join(path),
                    time_column,
                    column,
                    &options_of(binding),
                )?;
                s.id = binding.series_id(variable);
                Ok(s)
            }
        }
    }
}

/// File contents held in memory, keyed by the relative path used in the model.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InMemoryResolver {
    pub files: BTreeMap<String, String>,
}

impl InMemoryResolver {
    pub fn new(files: BTreeMap<String, String>) -> Self {
        InMemoryResolver { files }
    }
}

impl DataResolver for InMemoryResolver {
    fn resolve(&self, variable: &str, binding: &DataBinding) -> Result<TimeSeries, DataError> {
        match &binding.source {
            DataSource::Inline { points } => inline_series(variable, binding, points),
            DataSource::File {
                path,
                time_column,
                column,
            } => {
                let text = self.files.get(path).ok_or_else(|| DataError::Io {
                    path: path.clone(),
                    message: "file not provided".into(),
                })?;
                let mut s =
                    parse_series_csv(path, text, time_column, column, &options_of(binding))?;
                s.id = binding.series_id(variable);
                Ok(s)
            }
        }
    }
}

/// Resolver for models whose bindings are all inline.
pub struct InlineOnly;

impl DataResolver for InlineOnly {
    fn resolve(&self, variable: &str, binding: &DataBinding) -> Result<TimeSeries, DataError> {
        InMemoryResolver::default().resolve(variable, binding)
    }
}
