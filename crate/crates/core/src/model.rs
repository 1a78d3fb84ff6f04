//! Model data structure shared by the parser, graph analysis and the engine.
//!
//! A [`Model`] is a plain value: elements are kept in declaration order and
//! duplicates are representable so that validation can report them.
//! Structural comparison ignores declaration order, see
//! [`Model::canonicalized`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{DataBinding, LookupTable};
use crate::expr::Expr;
use crate::sim::{Indicator, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSpec {
    pub t_start: f64,
    pub t_stop: f64,
    pub dt: f64,
    pub time_unit: String,
}

/// Absolute tolerance on `(t_stop - t_start) / dt` being an integer.
pub const STEP_TOLERANCE: f64 = 1e-9;

impl TimeSpec {
    pub fn new(t_start: f64, t_stop: f64, dt: f64, time_unit: impl Into<String>) -> Self {
        TimeSpec {
            t_start,
            t_stop,
            dt,
            time_unit: time_unit.into(),
        }
    }

    /// Number of integration steps, or a reason the spec is unusable.
    pub fn steps(&self) -> Result<usize, String> {
        let finite = self.t_start.is_finite() && self.t_stop.is_finite() && self.dt.is_finite();
        if !finite {
            return Err("time bounds and dt must be finite".into());
        }
        if self.t_stop <= self.t_start {
            return Err(format!(
                "t_stop {} must exceed t_start {}",
                self.t_stop, self.t_start
            ));
        }
        if self.dt <= 0.0 {
            return Err(format!("dt {} must be positive", self.dt));
        }
        let ratio = (self.t_stop - self.t_start) / self.dt;
        let rounded = ratio.round();
        if rounded < 1.0 {
            return Err(format!(
                "time range shorter than one step of dt {}",
                self.dt
            ));
        }
        if (ratio - rounded).abs() > STEP_TOLERANCE {
            return Err(format!(
                "(t_stop - t_start) / dt = {ratio} is not an integer step count"
            ));
        }
        Ok(rounded as usize)
    }

    /// Grid time of step `n`; computed from `t_start` rather than accumulated.
    pub fn time_at(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.dt
    }
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec::new(0.0, 100.0, 1.0, "step")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariableKind {
    Constant,
    Auxiliary,
    ExogenousData,
}

impl VariableKind {
    pub fn keyword(self) -> &'static str {
        match self {
            VariableKind::Constant => "const",
            VariableKind::Auxiliary => "aux",
            VariableKind::ExogenousData => "data",
        }
    }
}

/// How a parameter or influence was quantified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    /// drawn from published studies
    Literature,
    /// deduced from data measured on the system
    MeasuredData,
    /// obtained from a study run for the purpose
    DedicatedStudy,
    /// a hypothesis from expert opinion, to be tested
    ExpertHypothesis,
}

impl SourceTag {
    pub const ALL: [SourceTag; 4] = [
        SourceTag::Literature,
        SourceTag::MeasuredData,
        SourceTag::DedicatedStudy,
        SourceTag::ExpertHypothesis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Literature => "literature",
            SourceTag::MeasuredData => "measured-data",
            SourceTag::DedicatedStudy => "dedicated-study",
            SourceTag::ExpertHypothesis => "expert-hypothesis",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SourceTag::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantificationSource {
    pub tag: SourceTag,
    #[serde(default)]
    pub citation: String,
}

/// Slider bounds offered to interactive front-ends for a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliderRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub kind: VariableKind,
    /// Absent for exogenous data and for auxiliaries not yet quantified.
    #[serde(default)]
    pub expression: Option<Expr>,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub provenance: Option<QuantificationSource>,
    #[serde(default)]
    pub doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slider: Option<SliderRange>,
}

impl Variable {
    pub fn constant(id: impl Into<String>, expression: Expr) -> Self {
        Variable::with_kind(id, VariableKind::Constant, Some(expression))
    }

    pub fn auxiliary(id: impl Into<String>, expression: Expr) -> Self {
        Variable::with_kind(id, VariableKind::Auxiliary, Some(expression))
    }

    pub fn exogenous(id: impl Into<String>) -> Self {
        Variable::with_kind(id, VariableKind::ExogenousData, None)
    }

    fn with_kind(id: impl Into<String>, kind: VariableKind, expression: Option<Expr>) -> Self {
        Variable {
            id: id.into(),
            name: String::new(),
            kind,
            expression,
            unit: String::new(),
            provenance: None,
            doc: String::new(),
            slider: None,
        }
    }

    pub fn with_source(mut self, tag: SourceTag, citation: impl Into<String>) -> Self {
        self.provenance = Some(QuantificationSource {
            tag,
            citation: citation.into(),
        });
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stock {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub initial: Expr,
    #[serde(default)]
    pub inflows: Vec<String>,
    #[serde(default)]
    pub outflows: Vec<String>,
    #[serde(default)]
    pub non_negative: bool,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub provenance: Option<QuantificationSource>,
    #[serde(default)]
    pub doc: String,
}

impl Stock {
    pub fn new(id: impl Into<String>, initial: Expr) -> Self {
        Stock {
            id: id.into(),
            name: String::new(),
            initial,
            inflows: Vec::new(),
            outflows: Vec::new(),
            non_negative: false,
            unit: String::new(),
            provenance: None,
            doc: String::new(),
        }
    }

    pub fn inflow(mut self, id: impl Into<String>) -> Self {
        self.inflows.push(id.into());
        self
    }

    pub fn outflow(mut self, id: impl Into<String>) -> Self {
        self.outflows.push(id.into());
        self
    }

    pub fn non_negative(mut self) -> Self {
        self.non_negative = true;
        self
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    #[default]
    Unspecified,
}

impl Polarity {
    pub fn symbol(self) -> &'static str {
        match self {
            Polarity::Positive => "+",
            Polarity::Negative => "-",
            Polarity::Unspecified => "?",
        }
    }
}

/// Which kind of consequence a link contributes to. Reporting only.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum EffectOrder {
    FirstOrder,
    DirectRebound,
    IndirectRebound,
    HigherOrder,
    #[default]
    Untagged,
}

impl EffectOrder {
    pub const ALL: [EffectOrder; 5] = [
        EffectOrder::FirstOrder,
        EffectOrder::DirectRebound,
        EffectOrder::IndirectRebound,
        EffectOrder::HigherOrder,
        EffectOrder::Untagged,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EffectOrder::FirstOrder => "first-order",
            EffectOrder::DirectRebound => "direct-rebound",
            EffectOrder::IndirectRebound => "indirect-rebound",
            EffectOrder::HigherOrder => "higher-order",
            EffectOrder::Untagged => "untagged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EffectOrder::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for EffectOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InfluenceLink {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub polarity: Polarity,
    #[serde(default)]
    pub delayed: bool,
    #[serde(default)]
    pub effect_order: EffectOrder,
}

impl InfluenceLink {
    pub fn new(from: impl Into<String>, to: impl Into<String>, polarity: Polarity) -> Self {
        InfluenceLink {
            from: from.into(),
            to: to.into(),
            polarity,
            delayed: false,
            effect_order: EffectOrder::Untagged,
        }
    }

    pub fn delayed(mut self) -> Self {
        self.delayed = true;
        self
    }

    pub fn order(mut self, order: EffectOrder) -> Self {
        self.effect_order = order;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub time_spec: TimeSpec,
    #[serde(default)]
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub stocks: Vec<Stock>,
    #[serde(default)]
    pub links: Vec<InfluenceLink>,
    #[serde(default)]
    pub lookups: Vec<LookupTable>,
    #[serde(default)]
    pub data_bindings: BTreeMap<String, DataBinding>,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub indicators: Vec<Indicator>,
    #[serde(default)]
    pub notes: String,
}

/// A borrowed view of any element that owns an id.
#[derive(Debug, Clone, Copy)]
pub enum Element<'a> {
    Variable(&'a Variable),
    Stock(&'a Stock),
    Lookup(&'a LookupTable),
}

impl<'a> Element<'a> {
    pub fn id(&self) -> &'a str {
        match self {
            Element::Variable(v) => &v.id,
            Element::Stock(s) => &s.id,
            Element::Lookup(l) => &l.id,
        }
    }
}

impl Model {
    pub fn new(id: impl Into<String>, time_spec: TimeSpec) -> Self {
        Model {
            id: id.into(),
            name: String::new(),
            time_spec,
            variables: Vec::new(),
            stocks: Vec::new(),
            links: Vec::new(),
            lookups: Vec::new(),
            data_bindings: BTreeMap::new(),
            scenarios: Vec::new(),
            indicators: Vec::new(),
            notes: String::new(),
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = Element<'_>> {
        self.variables
            .iter()
            .map(Element::Variable)
            .chain(self.stocks.iter().map(Element::Stock))
            .chain(self.lookups.iter().map(Element::Lookup))
    }

    pub fn element(&self, id: &str) -> Option<Element<'_>> {
        self.elements().find(|e| e.id() == id)
    }

    pub fn variable(&self, id: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.id == id)
    }

    pub fn variable_mut(&mut self, id: &str) -> Option<&mut Variable> {
        self.variables.iter_mut().find(|v| v.id == id)
    }

    pub fn stock(&self, id: &str) -> Option<&Stock> {
        self.stocks.iter().find(|s| s.id == id)
    }

    pub fn lookup(&self, id: &str) -> Option<&LookupTable> {
        self.lookups.iter().find(|l| l.id == id)
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty() && self.stocks.is_empty() && self.lookups.is_empty()
    }

    /// Copy with every element list in canonical order: elements by id,
    /// links by endpoints, scenarios and indicators by name.
    pub fn canonicalized(&self) -> Model {
        let mut m = self.clone();
        m.variables.sort_by(|a, b| a.id.cmp(&b.id));
        m.stocks.sort_by(|a, b| a.id.cmp(&b.id));
        m.lookups.sort_by(|a, b| a.id.cmp(&b.id));
        m.links.sort();
        m.scenarios.sort_by(|a, b| a.name.cmp(&b.name));
        for s in &mut m.scenarios {
            s.canonicalize();
        }
        m.indicators.sort_by(|a, b| a.name.cmp(&b.name));
        m
    }

    /// Equality up to declaration order.
    pub fn structurally_eq(&self, other: &Model) -> bool {
        self.canonicalized() == other.canonicalized()
    }
}
