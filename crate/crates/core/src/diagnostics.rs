//! Diagnostics and the registry of stable diagnostic codes.
//!
//! Every code emitted anywhere in the crate is declared here. The
//! `registry_is_complete` test scans the sources for code literals and
//! fails when one is missing from [`REGISTRY`].

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

/// A line/column range in model text. Lines and columns are 1-based,
/// columns count Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub end_line: usize,
    pub end_column: usize,
}

impl Span {
    pub fn point(line: usize, column: usize) -> Self {
        Span {
            line,
            column,
            end_line: line,
            end_column: column,
        }
    }

    pub fn to(self, other: Span) -> Span {
        Span {
            line: self.line,
            column: self.column,
            end_line: other.end_line,
            end_column: other.end_column,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub location: Location,
}

impl Diagnostic {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: severity_of(code),
            code: code.to_string(),
            message: message.into(),
            location: Location::default(),
        }
    }

    pub fn at_element(mut self, id: impl Into<String>) -> Self {
        self.location.element = Some(id.into());
        self
    }

    pub fn at_span(mut self, span: Span) -> Self {
        self.location.span = Some(span);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.severity, self.code)?;
        if let Some(span) = self.location.span {
            write!(f, " at {}:{}", span.line, span.column)?;
        }
        if let Some(el) = &self.location.element {
            write!(f, " [{el}]")?;
        }
        write!(f, ": {}", self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Severity implied by a code prefix (`E-`, `W-`, `I-`).
pub fn severity_of(code: &str) -> Severity {
    match code.as_bytes().first() {
        Some(b'W') => Severity::Warning,
        Some(b'I') => Severity::Info,
        _ => Severity::Error,
    }
}

pub struct CodeInfo {
    pub code: &'static str,
    pub http_status: u16,
    pub summary: &'static str,
}

macro_rules! registry {
    ($( $name:ident = $code:literal, $status:literal, $summary:literal; )*) => {
        $( pub const $name: &str = $code; )*

        /// All diagnostic and API error codes, with the HTTP status used
        /// when one surfaces as the primary error of a request.
        pub const REGISTRY: &[CodeInfo] = &[
            $( CodeInfo { code: $code, http_status: $status, summary: $summary }, )*
        ];
    };
}

registry! {
    // model structure
    E_DUP_ID = "E-DUP-ID", 422, "two elements share an id";
    E_BAD_ID = "E-BAD-ID", 422, "identifier is not lowercase snake case or collides with a builtin";
    E_UNKNOWN_REF = "E-UNKNOWN-REF", 422, "reference to an undeclared element";
    E_REF_KIND = "E-REF-KIND", 422, "reference names an element of the wrong kind";
    E_TIME_SPEC = "E-TIME-SPEC", 422, "invalid time specification";
    E_CONST_EXPR = "E-CONST-EXPR", 422, "constant or constant-evaluable expression depends on variables or time";
    E_MISSING_EXPR = "E-MISSING-EXPR", 422, "constant without an expression";
    E_INCOMPLETE = "E-INCOMPLETE", 422, "model has auxiliaries without expressions";
    E_MISSING_BINDING = "E-MISSING-BINDING", 422, "exogenous-data variable without a data binding";
    E_BINDING_KIND = "E-BINDING-KIND", 422, "data binding on a variable that is not exogenous-data";
    E_EXOGENOUS_EXPR = "E-EXOGENOUS-EXPR", 422, "exogenous-data variable carries an expression";
    E_ALGEBRAIC_LOOP = "E-ALGEBRAIC-LOOP", 422, "instantaneous dependency cycle without stock or delay";
    E_LOOKUP_TABLE = "E-LOOKUP-TABLE", 422, "lookup table has fewer than two points or non-increasing x";
    E_NONFINITE = "E-NONFINITE", 422, "literal is NaN or infinite";
    E_ARITY = "E-ARITY", 422, "builtin called with the wrong number of arguments";
    E_SYNTAX = "E-SYNTAX", 422, "model text does not match the grammar";
    E_TAU_TOO_SMALL = "E-TAU-TOO-SMALL", 422, "smooth time constant smaller than dt";
    E_DELAY_TOO_SMALL = "E-DELAY-TOO-SMALL", 422, "fixed delay rounds to zero steps";
    E_DELAY_PARAM = "E-DELAY-PARAM", 422, "delay parameter is not constant-evaluable";
    E_SCENARIO = "E-SCENARIO", 422, "malformed scenario or indicator declaration";
    W_LINK_UNUSED = "W-LINK-UNUSED", 200, "declared link not reflected in the target's expression";
    W_LINK_MISSING = "W-LINK-MISSING", 200, "expression reference without a declared link";
    W_SELF_LINK = "W-SELF-LINK", 200, "link from an element to itself";
    W_DUP_LINK = "W-DUP-LINK", 200, "same link declared twice";
    W_DELAY_ROUND = "W-DELAY-ROUND", 200, "fixed delay rounded to a multiple of dt";
    W_CLAMP = "W-CLAMP", 200, "non-negative stock clamped at zero";
    W_LOOP_TRUNCATED = "W-LOOP-TRUNCATED", 200, "loop enumeration stopped at max_count";
    I_EMPTY = "I-EMPTY", 200, "model declares no elements";
    I_INCOMPLETE = "I-INCOMPLETE", 200, "auxiliary has no expression yet";
    // evaluation and runs
    E_DIV_ZERO = "E-DIV-ZERO", 422, "division by exactly zero";
    E_DOMAIN = "E-DOMAIN", 422, "math domain error";
    E_DATA_RANGE = "E-DATA-RANGE", 422, "time outside the data series under its extrapolation policy";
    E_BAD_TARGET = "E-BAD-TARGET", 422, "scenario targets an unknown or unsupported element";
    E_OVERRIDE_NONCONST = "E-OVERRIDE-NONCONST", 422, "override targets a non-constant";
    E_INTERVENTION_TIME = "E-INTERVENTION-TIME", 422, "intervention time outside the simulated range";
    E_INTERVENTION_DUP = "E-INTERVENTION-DUP", 422, "two interventions on the same target at the same time";
    E_INVALID_MODEL = "E-INVALID-MODEL", 422, "model has validation errors";
    E_UNKNOWN_SERIES = "E-UNKNOWN-SERIES", 422, "indicator target not present in the run";
    E_GRID_MISMATCH = "E-GRID-MISMATCH", 422, "runs have different time grids";
    E_LINEAGE_MISMATCH = "E-LINEAGE-MISMATCH", 422, "runs come from different base models";
    E_NO_BASELINE = "E-NO-BASELINE", 422, "baseline scenario not among the runs";
    E_NO_SCENARIO = "E-NO-SCENARIO", 422, "scenario name not declared in the model";
    // data files
    E_CSV_PARSE = "E-CSV-PARSE", 422, "malformed CSV row";
    E_NONMONOTONIC_TIME = "E-NONMONOTONIC-TIME", 422, "time column not strictly increasing";
    E_MISSING_COLUMN = "E-MISSING-COLUMN", 422, "CSV header lacks a required column";
    E_EMPTY = "E-EMPTY", 422, "series has no rows";
    E_IO = "E-IO", 422, "file could not be read";
    // import
    E_EMPTY_TREE = "E-EMPTY-TREE", 422, "consequence tree is empty";
    E_EMPTY_LABEL = "E-EMPTY-LABEL", 422, "consequence tree node without a label";
    // transport
    E_BAD_JSON = "E-BAD-JSON", 400, "request body is not valid JSON for the endpoint";
    E_NOT_FOUND = "E-NOT-FOUND", 404, "no such resource";
    E_TOO_LARGE = "E-TOO-LARGE", 413, "run exceeds the request size cap";
    E_INTERNAL = "E-INTERNAL", 500, "engine defect";
}

pub fn lookup_code(code: &str) -> Option<&'static CodeInfo> {
    REGISTRY.iter().find(|c| c.code == code)
}
