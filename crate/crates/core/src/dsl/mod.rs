//! The `.mag` text format.
//!
//! ```text
//! model "second_hand_platform" { time 0 .. 60 dt 1 unit "month" }
//! const emission_factor = 0.12 unit "kgCO2/km" source literature "cite..."
//! data  monthly_users from "users.csv" column "users"
//! aux   items_sold = monthly_users * purchase_rate
//! stock wardrobe init 50 inflow items_sold outflow discards non_negative
//! link  items_sold -> transport_km polarity + order first-order
//! lookup price_effect = [(0,1.0), (10,0.8), (30,0.5)] interp linear
//! indicator total = cumulative(transport_km)
//! scenario greener "description" {
//!   override emission_factor = 0.1
//!   set purchase_rate at 12 = 0.5
//!   scale items_sold at 24 by 0.9
//! }
//! ```
//!
//! One statement per line; `#` starts a comment. Newlines inside
//! parentheses and brackets are ignored.

mod lexer;
mod parser;

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{DataSource, Extrapolation, Interpolation};
use crate::diagnostics::{self as codes, has_errors, Diagnostic};
use crate::expr::{format_number, Expr};
use crate::model::{Model, Polarity, QuantificationSource, VariableKind};
use crate::sim::{Action, Direction, IndicatorKind};
use crate::validate::validate_model;

pub use parser::SpanIndex;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseResult {
    pub fn is_ok(&self) -> bool {
        self.model.is_some()
    }
}

/// Parse a single expression.
pub fn parse_expression(text: &str) -> Result<Expr, Vec<Diagnostic>> {
    let mut p = parser::Parser::new(text);
    if !p.diags.is_empty() {
        return Err(p.diags);
    }
    match p.expression() {
        Ok(e) => {
            let rest = p.remaining();
            if rest.is_empty() {
                Ok(e)
            } else {
                Err(rest)
            }
        }
        Err(d) => Err(vec![d]),
    }
}

impl parser::Parser {
    fn remaining(&mut self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        while self.eat_newline() {}
        if !self.at_eof() {
            out.push(
                Diagnostic::new(codes::E_SYNTAX, "unexpected input after expression")
                    .at_span(self.here()),
            );
        }
        out
    }
}

/// Grammar-level parse without semantic validation. The model is returned
/// whenever the text is syntactically well formed.
pub fn parse_model_syntax(text: &str) -> (Option<Model>, Vec<Diagnostic>, SpanIndex) {
    let mut p = parser::Parser::new(text);
    let model = p.model();
    let diags = std::mem::take(&mut p.diags);
    let model = if has_errors(&diags) { None } else { model };
    (model, diags, p.spans)
}

/// Parse and validate model text. The model is present iff no diagnostic
/// has error severity.
pub fn parse_model(text: &str) -> ParseResult {
    let (model, mut diags, spans) = parse_model_syntax(text);
    let Some(model) = model else {
        return ParseResult {
            model: None,
            diagnostics: diags,
        };
    };

    // duplicate ids and unknown references get precise spans here
    let mut seen = HashSet::new();
    for (id, span) in &spans.declarations {
        if !seen.insert(id.as_str()) {
            diags.push(
                Diagnostic::new(
                    codes::E_DUP_ID,
                    format!("`{id}` is declared more than once"),
                )
                .at_element(id.clone())
                .at_span(*span),
            );
        }
    }
    for (element, name, span) in &spans.references {
        if !seen.contains(name.as_str()) {
            diags.push(
                Diagnostic::new(
                    codes::E_UNKNOWN_REF,
                    format!("`{element}` references unknown `{name}`"),
                )
                .at_element(element.clone())
                .at_span(*span),
            );
        }
    }
    let spanned_refs = !diags.is_empty();

    for mut d in validate_model(&model) {
        if d.code == codes::E_DUP_ID {
            continue;
        }
        if d.code == codes::E_UNKNOWN_REF && spanned_refs && d.location.span.is_none() {
            // already reported with a span unless it comes from a link or scenario
            let from_element = d.location.element.as_deref().is_some_and(|el| {
                spans
                    .references
                    .iter()
                    .any(|(e, n, _)| e == el && d.message.contains(&format!("`{n}`")))
            });
            if from_element {
                continue;
            }
        }
        if d.location.span.is_none() {
            if let Some(el) = &d.location.element {
                d.location.span = spans.declaration(el).or_else(|| {
                    spans
                        .links
                        .iter()
                        .find(|(_, to, _)| to == el)
                        .map(|(_, _, s)| *s)
                });
            } else {
                d.location.span = spans.header;
            }
        }
        diags.push(d);
    }
    let model = if has_errors(&diags) {
        None
    } else {
        Some(model)
    };
    ParseResult {
        model,
        diagnostics: diags,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("model cannot be serialized: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
pub struct SerializeError(pub Vec<Diagnostic>);

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn points(pts: &[(f64, f64)]) -> String {
    let inner: Vec<String> = pts
        .iter()
        .map(|(x, y)| format!("({}, {})", format_number(*x), format_number(*y)))
        .collect();
    format!("[{}]", inner.join(", "))
}

fn meta(out: &mut String, name: &str, unit: &str, prov: &Option<QuantificationSource>) {
    if !name.is_empty() {
        write!(out, " name {}", quote(name)).unwrap();
    }
    if !unit.is_empty() {
        write!(out, " unit {}", quote(unit)).unwrap();
    }
    if let Some(p) = prov {
        write!(out, " source {}", p.tag.as_str()).unwrap();
        if !p.citation.is_empty() {
            write!(out, " {}", quote(&p.citation)).unwrap();
        }
    }
}

/// Conditions under which the text form cannot represent a model.
fn representability(model: &Model) -> Vec<Diagnostic> {
    validate_model(model)
        .into_iter()
        .filter(|d| {
            matches!(
                d.code.as_str(),
                "E-DUP-ID" | "E-BAD-ID" | "E-NONFINITE" | "E-TIME-SPEC"
            )
        })
        .collect()
}

/// Canonical text: elements sorted by id, then links, indicators and
/// scenarios, with numbers in shortest round-trip form.
pub fn serialize_model(model: &Model) -> Result<String, SerializeError> {
    let problems = representability(model);
    if !problems.is_empty() {
        return Err(SerializeError(problems));
    }
    let m = model.canonicalized();
    let mut out = String::new();
    let ts = &m.time_spec;
    write!(out, "model {}", quote(&m.id)).unwrap();
    if !m.name.is_empty() {
        write!(out, " name {}", quote(&m.name)).unwrap();
    }
    write!(
        out,
        " {{ time {} .. {} dt {}",
        format_number(ts.t_start),
        format_number(ts.t_stop),
        format_number(ts.dt)
    )
    .unwrap();
    if !ts.time_unit.is_empty() {
        write!(out, " unit {}", quote(&ts.time_unit)).unwrap();
    }
    out.push_str(" }\n");
    if !m.notes.is_empty() {
        for line in m.notes.split('\n') {
            writeln!(out, "notes {}", quote(line)).unwrap();
        }
    }

    enum Item<'a> {
        Var(&'a crate::model::Variable),
        Stock(&'a crate::model::Stock),
        Lookup(&'a crate::data::LookupTable),
    }
    let mut items: Vec<(&str, Item)> = m
        .variables
        .iter()
        .map(|v| (v.id.as_str(), Item::Var(v)))
        .chain(m.stocks.iter().map(|s| (s.id.as_str(), Item::Stock(s))))
        .chain(m.lookups.iter().map(|l| (l.id.as_str(), Item::Lookup(l))))
        .collect();
    items.sort_by(|a, b| a.0.cmp(b.0));
    if !items.is_empty() {
        out.push('\n');
    }
    for (_, item) in items {
        match item {
            Item::Var(v) => {
                write!(out, "{} {}", v.kind.keyword(), v.id).unwrap();
                if v.kind == VariableKind::ExogenousData {
                    if let Some(b) = m.data_bindings.get(&v.id) {
                        match &b.source {
                            DataSource::File {
                                path,
                                time_column,
                                column,
                            } => {
                                write!(out, " from {} column {}", quote(path), quote(column))
                                    .unwrap();
                                if time_column != "t" {
                                    write!(out, " time {}", quote(time_column)).unwrap();
                                }
                            }
                            DataSource::Inline { points: pts } => {
                                write!(out, " points {}", points(pts)).unwrap();
                            }
                        }
                        if b.interp != Interpolation::Linear {
                            write!(out, " interp {}", b.interp.as_str()).unwrap();
                        }
                        if b.extrapolation != Extrapolation::Error {
                            write!(out, " extrapolate {}", b.extrapolation.as_str()).unwrap();
                        }
                    }
                } else if let Some(e) = &v.expression {
                    write!(out, " = {e}").unwrap();
                }
                meta(&mut out, &v.name, &v.unit, &v.provenance);
                if let Some(s) = v.slider {
                    write!(
                        out,
                        " slider {} .. {}",
                        format_number(s.min),
                        format_number(s.max)
                    )
                    .unwrap();
                }
                if !v.doc.is_empty() {
                    write!(out, " doc {}", quote(&v.doc)).unwrap();
                }
            }
            Item::Stock(s) => {
                write!(out, "stock {} init {}", s.id, s.initial).unwrap();
                if !s.inflows.is_empty() {
                    write!(out, " inflow {}", s.inflows.join(", ")).unwrap();
                }
                if !s.outflows.is_empty() {
                    write!(out, " outflow {}", s.outflows.join(", ")).unwrap();
                }
                if s.non_negative {
                    out.push_str(" non_negative");
                }
                meta(&mut out, &s.name, &s.unit, &s.provenance);
                if !s.doc.is_empty() {
                    write!(out, " doc {}", quote(&s.doc)).unwrap();
                }
            }
            Item::Lookup(l) => {
                write!(out, "lookup {} = {} interp linear", l.id, points(&l.points)).unwrap();
                if !l.doc.is_empty() {
                    write!(out, " doc {}", quote(&l.doc)).unwrap();
                }
            }
        }
        out.push('\n');
    }

    if !m.links.is_empty() {
        out.push('\n');
    }
    for l in &m.links {
        write!(out, "link {} -> {}", l.from, l.to).unwrap();
        if l.polarity != Polarity::Unspecified {
            write!(out, " polarity {}", l.polarity.symbol()).unwrap();
        }
        if l.delayed {
            out.push_str(" delayed");
        }
        if l.effect_order != crate::model::EffectOrder::Untagged {
            write!(out, " order {}", l.effect_order).unwrap();
        }
        out.push('\n');
    }

    if !m.indicators.is_empty() {
        out.push('\n');
    }
    for ind in &m.indicators {
        let (kind, extra) = match ind.kind {
            IndicatorKind::FinalValue => ("final_value", String::new()),
            IndicatorKind::Cumulative => ("cumulative", String::new()),
            IndicatorKind::Peak => ("peak", String::new()),
            IndicatorKind::Average => ("average", String::new()),
            IndicatorKind::TimeToThreshold {
                threshold,
                direction,
            } => (
                "time_to_threshold",
                format!(
                    ", {}, {}",
                    format_number(threshold),
                    match direction {
                        Direction::Rising => "rising",
                        Direction::Falling => "falling",
                    }
                ),
            ),
        };
        writeln!(
            out,
            "indicator {} = {kind}({}{extra})",
            ind.name, ind.target
        )
        .unwrap();
    }

    for s in &m.scenarios {
        out.push('\n');
        write!(out, "scenario {}", s.name).unwrap();
        if !s.description.is_empty() {
            write!(out, " {}", quote(&s.description)).unwrap();
        }
        out.push_str(" {\n");
        for (target, v) in &s.overrides {
            writeln!(out, "  override {target} = {}", format_number(*v)).unwrap();
        }
        for iv in &s.interventions {
            match iv.action {
                Action::Set { value } => writeln!(
                    out,
                    "  set {} at {} = {}",
                    iv.target,
                    format_number(iv.at_time),
                    format_number(value)
                ),
                Action::Scale { factor } => writeln!(
                    out,
                    "  scale {} at {} by {}",
                    iv.target,
                    format_number(iv.at_time),
                    format_number(factor)
                ),
            }
            .unwrap();
        }
        out.push_str("}\n");
    }
    Ok(out)
}

/// Parse then serialize; the fixed point of the text format.
pub fn canonicalize_text(text: &str) -> Result<String, Vec<Diagnostic>> {
    let (model, diags, _) = parse_model_syntax(text);
    let model = model.ok_or(diags)?;
    serialize_model(&model).map_err(|e| e.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "model \"m\" { time 0 .. 10 dt 1 unit \"month\" }\n";

    fn parse(body: &str) -> ParseResult {
        parse_model(&format!("{HEADER}{body}"))
    }

    #[test]
    fn minimal_constant() {
        let r = parse("const price = 12 unit \"EUR\"\n");
        let m = r.model.expect("parses");
        assert_eq!(m.variables.len(), 1);
        assert_eq!(m.variables[0].expression, Some(Expr::lit(12.0)));
        assert_eq!(m.variables[0].unit, "EUR");
        assert_eq!(m.time_spec.time_unit, "month");
    }

    #[test]
    fn trailing_operator_reports_its_position() {
        let r = parse("aux x = 1 + ");
        assert!(r.model.is_none());
        let d = &r.diagnostics[0];
        assert_eq!(d.code, "E-SYNTAX");
        let span = d.location.span.unwrap();
        assert_eq!((span.line, span.column), (2, 11));
    }

    #[test]
    fn smooth_arity() {
        let r = parse("const x = 1\naux y = smooth(x, 2)\n");
        assert!(r.model.is_none());
        assert_eq!(r.diagnostics[0].code, "E-ARITY");
        assert_eq!(r.diagnostics[0].location.span.unwrap().line, 3);
    }

    #[test]
    fn unknown_reference_has_span() {
        let r = parse("aux y = 2 * ghost\n");
        let d = r
            .diagnostics
            .iter()
            .find(|d| d.code == "E-UNKNOWN-REF")
            .unwrap();
        let span = d.location.span.unwrap();
        assert_eq!((span.line, span.column), (2, 13));
        assert_eq!(
            r.diagnostics
                .iter()
                .filter(|d| d.code == "E-UNKNOWN-REF")
                .count(),
            1
        );
    }

    #[test]
    fn duplicate_id_has_span_of_second_declaration() {
        let r = parse("const x = 1\nconst x = 2\n");
        let d = r.diagnostics.iter().find(|d| d.code == "E-DUP-ID").unwrap();
        assert_eq!(d.location.span.unwrap().line, 3);
        assert_eq!(
            r.diagnostics
                .iter()
                .filter(|d| d.code == "E-DUP-ID")
                .count(),
            1
        );
    }

    #[test]
    fn multiple_errors_are_collected() {
        let r = parse("aux a = 1 +* 2\nfoo bar\naux b = 2 +\n");
        let n = r
            .diagnostics
            .iter()
            .filter(|d| d.code == "E-SYNTAX")
            .count();
        assert!(n >= 2, "{:?}", r.diagnostics);
    }

    #[test]
    fn never_panics_on_garbage() {
        for src in [
            "",
            "model",
            "model \"x\" {",
            "}}}}",
            "link -> ->",
            "scenario s {",
            "const = = =",
            "aux x = ((((",
            "lookup t = [(1,",
            "\"",
            "model \"m\" { time 1 .. 0 dt 1 }",
        ] {
            let _ = parse_model(src);
            let _ = parse(src);
        }
    }

    #[test]
    fn full_statement_set() {
        let src = r#"model "m" name "Demo" { time 0 .. 10 dt 0.5 unit "month" }
notes "first line"
notes "second line"
const k = 0.12 unit "kg/km" source literature "ADEME 2022" slider 0 .. 1 doc "factor"
data users from "users.csv" column "users" time "month" interp hold extrapolate hold_ends source measured-data
data inline_users points [(0, 1), (10, 2)]
aux flow = users * k + inline_users source expert-hypothesis
aux smoothed = smooth(flow, 2, 0)
stock s init 5 inflow flow outflow drain, leak non_negative unit "kg"
aux drain = s / 4
aux leak = 0.1 * s
lookup curve = [(0, 1), (10, 0.5)] interp linear
link users -> flow polarity + order first-order
link k -> flow polarity + delayed order direct-rebound
indicator total = final_value(s)
indicator when = time_to_threshold(s, 3, falling)
scenario cheaper "Lower factor" {
  override k = 0.06
  set flow at 2 = 1
  scale flow at 4 by 0.5
}
"#;
        let (m, diags, _) = parse_model_syntax(src);
        assert!(diags.is_empty(), "{diags:?}");
        let m = m.unwrap();
        assert_eq!(m.name, "Demo");
        assert_eq!(m.notes, "first line\nsecond line");
        assert_eq!(m.variables.len(), 7);
        let s = m.stock("s").unwrap();
        assert_eq!(s.outflows, vec!["drain", "leak"]);
        assert!(s.non_negative);
        let b = &m.data_bindings["users"];
        assert_eq!(b.interp, Interpolation::Hold);
        assert_eq!(b.extrapolation, Extrapolation::HoldEnds);
        assert_eq!(
            m.links[1].effect_order,
            crate::model::EffectOrder::DirectRebound
        );
        assert!(m.links[1].delayed);
        assert_eq!(m.scenarios[0].interventions.len(), 2);
        assert_eq!(m.indicators.len(), 2);
        let text = serialize_model(&m).unwrap();
        let (again, diags, _) = parse_model_syntax(&text);
        assert!(diags.is_empty(), "{diags:?}\n{text}");
        assert!(again.unwrap().structurally_eq(&m), "{text}");
    }

    #[test]
    fn canonical_text_is_formatting_independent() {
        let a = "model \"m\" { time 0 .. 10 dt 1 }\nconst b = 2\nconst a = 1*(2+3)\n";
        let b = "# comment\nmodel   \"m\"   {  time 0..10   dt 1  }\n\nconst a = 1 * ( 2 + 3 )   # trailing\nconst   b=2\n";
        assert_eq!(canonicalize_text(a).unwrap(), canonicalize_text(b).unwrap());
    }

    #[test]
    fn shortest_round_trip_numerals() {
        let r = parse("const x = 0.1\nconst y = 1e-7\nconst z = 123456789.125\n");
        let m = r.model.unwrap();
        let text = serialize_model(&m).unwrap();
        assert!(text.contains("const x = 0.1\n"), "{text}");
        let back = parse_model(&text).model.unwrap();
        for id in ["x", "y", "z"] {
            let (Some(Expr::Literal(a)), Some(Expr::Literal(b))) = (
                &m.variable(id).unwrap().expression,
                &back.variable(id).unwrap().expression,
            ) else {
                panic!()
            };
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn strings_escape_round_trip() {
        let r = parse("const x = 1 doc \"a \\\"quoted\\\" \\\\ word\"\n");
        let m = r.model.unwrap();
        assert_eq!(m.variables[0].doc, "a \"quoted\" \\ word");
        let text = serialize_model(&m).unwrap();
        assert_eq!(parse_model(&text).model.unwrap(), m.canonicalized());
    }

    #[test]
    fn serialize_refuses_duplicate_ids() {
        let mut m = Model::new("m", crate::model::TimeSpec::default());
        m.variables
            .push(crate::model::Variable::constant("x", Expr::lit(1.0)));
        m.variables
            .push(crate::model::Variable::constant("x", Expr::lit(2.0)));
        let err = serialize_model(&m).unwrap_err();
        assert_eq!(err.0[0].code, "E-DUP-ID");
    }

    #[test]
    fn expression_entry_point() {
        assert!(parse_expression("a + ").is_err());
        assert!(parse_expression("a b").is_err());
        assert_eq!(parse_expression("a").unwrap(), Expr::var("a"));
    }
}
