//! Structural validation and content fingerprints.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{DataSource, TimeSeries};
use crate::diagnostics::{self as codes, Diagnostic};
use crate::expr::{eval_expression, is_reserved, Builtin, Expr, NoDelays, WithTables};
use crate::graph::{build_dependency_graph, evaluation_order};
use crate::model::{Element, Model, VariableKind};
use crate::sim::{check_scenario, IndicatorKind};

/// Relative tolerance for a fixed delay being a whole number of steps.
pub const DELAY_GRID_TOLERANCE: f64 = 1e-9;

/// Lowercase snake case; letters may be any Unicode letter without case or
/// in lower case.
pub fn is_valid_identifier(id: &str) -> bool {
    let mut chars = id.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    let ok_letter = |c: char| c.is_alphabetic() && !c.is_uppercase();
    (ok_letter(first) || first == '_')
        && chars.all(|c| ok_letter(c) || c.is_numeric() || c == '_')
        && !is_reserved(id)
}

/// Evaluate an expression that may only reference constants.
pub(crate) fn eval_constant(model: &Model, expr: &Expr, t: f64) -> Result<f64, String> {
    let mut env: HashMap<String, f64> = HashMap::new();
    for id in expr.refs() {
        let var = model
            .variable(id)
            .ok_or_else(|| format!("`{id}` is not declared"))?;
        if var.kind != VariableKind::Constant {
            return Err(format!("`{id}` is not a constant"));
        }
        let e = var
            .expression
            .as_ref()
            .ok_or_else(|| format!("constant `{id}` has no value"))?;
        if e.has_refs() {
            return Err(format!("constant `{id}` is not a literal expression"));
        }
        let v = eval_expression(
            e,
            &WithTables {
                env: &HashMap::new(),
                tables: &model.lookups,
            },
            t,
            &NoDelays,
        )
        .map_err(|e| e.to_string())?;
        env.insert(id.to_string(), v);
    }
    eval_expression(
        expr,
        &WithTables {
            env: &env,
            tables: &model.lookups,
        },
        t,
        &NoDelays,
    )
    .map_err(|e| e.to_string())
}

/// Every problem with a candidate model, errors first in discovery order.
/// Never fails; an empty-of-errors result means the model can be simulated.
pub fn validate_model(model: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let steps = match model.time_spec.steps() {
        Ok(n) => Some(n),
        Err(msg) => {
            out.push(Diagnostic::new(codes::E_TIME_SPEC, msg));
            None
        }
    };
    if model.is_empty() {
        out.push(Diagnostic::new(
            codes::I_EMPTY,
            "model declares no variables, stocks or lookups",
        ));
    }

    // ids
    let mut kinds: HashMap<&str, Element> = HashMap::new();
    let mut reported = HashSet::new();
    for el in model.elements() {
        let id = el.id();
        if !is_valid_identifier(id) {
            out.push(
                Diagnostic::new(
                    codes::E_BAD_ID,
                    format!("`{id}` is not a lowercase snake_case identifier or is reserved"),
                )
                .at_element(id),
            );
        }
        if kinds.insert(id, el).is_some() && reported.insert(id) {
            out.push(
                Diagnostic::new(
                    codes::E_DUP_ID,
                    format!("`{id}` is declared more than once"),
                )
                .at_element(id),
            );
        }
    }
    let is_value = |id: &str| {
        matches!(
            kinds.get(id),
            Some(Element::Variable(_) | Element::Stock(_))
        )
    };

    let check_refs = |out: &mut Vec<Diagnostic>, owner: &str, expr: &Expr| {
        for lit in expr.literals() {
            if !lit.is_finite() {
                out.push(
                    Diagnostic::new(
                        codes::E_NONFINITE,
                        format!("`{owner}` contains literal {lit}"),
                    )
                    .at_element(owner),
                );
            }
        }
        let mut seen = BTreeSet::new();
        for r in expr.refs() {
            if !seen.insert(r) {
                continue;
            }
            match kinds.get(r) {
                None => out.push(
                    Diagnostic::new(
                        codes::E_UNKNOWN_REF,
                        format!("`{owner}` references unknown `{r}`"),
                    )
                    .at_element(owner),
                ),
                Some(Element::Lookup(_)) => out.push(
                    Diagnostic::new(
                        codes::E_REF_KIND,
                        format!("`{owner}` uses lookup `{r}` as a value; write lookup({r}, x)"),
                    )
                    .at_element(owner),
                ),
                Some(_) => {}
            }
        }
        for t in expr.lookup_tables() {
            match kinds.get(t) {
                Some(Element::Lookup(_)) => {}
                None => out.push(
                    Diagnostic::new(
                        codes::E_UNKNOWN_REF,
                        format!("`{owner}` references unknown `{t}`"),
                    )
                    .at_element(owner),
                ),
                Some(_) => out.push(
                    Diagnostic::new(
                        codes::E_REF_KIND,
                        format!("`{owner}`: `{t}` is not a lookup table"),
                    )
                    .at_element(owner),
                ),
            }
        }
    };

    let mut incomplete = Vec::new();
    for var in &model.variables {
        let id = var.id.as_str();
        match (var.kind, &var.expression) {
            (VariableKind::Constant, None) => out.push(
                Diagnostic::new(
                    codes::E_MISSING_EXPR,
                    format!("constant `{id}` has no value"),
                )
                .at_element(id),
            ),
            (VariableKind::Constant, Some(e)) => {
                check_refs(&mut out, id, e);
                if e.has_refs() || e.is_time_dependent() {
                    out.push(
                        Diagnostic::new(
                            codes::E_CONST_EXPR,
                            format!(
                                "constant `{id}` must not reference variables or depend on time"
                            ),
                        )
                        .at_element(id),
                    );
                }
            }
            (VariableKind::Auxiliary, None) => {
                out.push(
                    Diagnostic::new(
                        codes::I_INCOMPLETE,
                        format!("auxiliary `{id}` has no expression yet"),
                    )
                    .at_element(id),
                );
                incomplete.push(id);
            }
            (VariableKind::Auxiliary, Some(e)) => {
                check_refs(&mut out, id, e);
                if let Some(steps) = steps {
                    let _ = steps;
                    check_delay_params(model, id, e, &mut out);
                }
            }
            (VariableKind::ExogenousData, Some(_)) => out.push(
                Diagnostic::new(
                    codes::E_EXOGENOUS_EXPR,
                    format!("data variable `{id}` cannot have an expression"),
                )
                .at_element(id),
            ),
            (VariableKind::ExogenousData, None) => {}
        }
        if var.kind == VariableKind::ExogenousData {
            match model.data_bindings.get(id) {
                None => out.push(
                    Diagnostic::new(
                        codes::E_MISSING_BINDING,
                        format!("data variable `{id}` has no data source"),
                    )
                    .at_element(id),
                ),
                Some(b) => {
                    if let DataSource::Inline { points } = &b.source {
                        let (times, values) = points.iter().copied().unzip();
                        if let Err(msg) =
                            TimeSeries::new(id, times, values, b.interp, b.extrapolation)
                        {
                            let code = if points.is_empty() {
                                codes::E_EMPTY
                            } else {
                                codes::E_NONMONOTONIC_TIME
                            };
                            out.push(
                                Diagnostic::new(code, format!("`{id}`: {msg}")).at_element(id),
                            );
                        }
                        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                            out.push(
                                Diagnostic::new(
                                    codes::E_NONFINITE,
                                    format!("`{id}` has a non-finite point"),
                                )
                                .at_element(id),
                            );
                        }
                    }
                }
            }
        }
        if let Some(s) = var.slider {
            if !(s.min.is_finite() && s.max.is_finite() && s.min <= s.max) {
                out.push(
                    Diagnostic::new(
                        codes::E_NONFINITE,
                        format!("`{id}` has an invalid slider range"),
                    )
                    .at_element(id),
                );
            }
        }
    }
    if !incomplete.is_empty() {
        out.push(Diagnostic::new(
            codes::E_INCOMPLETE,
            format!(
                "{} auxiliar{} without expression: {}",
                incomplete.len(),
                if incomplete.len() == 1 { "y" } else { "ies" },
                incomplete.join(", ")
            ),
        ));
    }
    for id in model.data_bindings.keys() {
        match model.variable(id) {
            Some(v) if v.kind == VariableKind::ExogenousData => {}
            Some(_) => out.push(
                Diagnostic::new(
                    codes::E_BINDING_KIND,
                    format!("`{id}` has a data source but is not a data variable"),
                )
                .at_element(id.as_str()),
            ),
            None => out.push(
                Diagnostic::new(
                    codes::E_UNKNOWN_REF,
                    format!("data source bound to unknown `{id}`"),
                )
                .at_element(id.as_str()),
            ),
        }
    }

    for stock in &model.stocks {
        let id = stock.id.as_str();
        check_refs(&mut out, id, &stock.initial);
        let non_const = stock.initial.refs().into_iter().any(|r| {
            model
                .variable(r)
                .is_some_and(|v| v.kind != VariableKind::Constant)
                || model.stock(r).is_some()
        });
        if non_const || stock.initial.is_time_dependent() {
            out.push(
                Diagnostic::new(
                    codes::E_CONST_EXPR,
                    format!("initial value of `{id}` may only reference constants"),
                )
                .at_element(id),
            );
        }
        for f in stock.inflows.iter().chain(&stock.outflows) {
            match kinds.get(f.as_str()) {
                Some(Element::Variable(_)) => {}
                None => out.push(
                    Diagnostic::new(
                        codes::E_UNKNOWN_REF,
                        format!("`{id}` references unknown `{f}`"),
                    )
                    .at_element(id),
                ),
                Some(_) => out.push(
                    Diagnostic::new(
                        codes::E_REF_KIND,
                        format!("flow `{f}` of `{id}` must be a variable"),
                    )
                    .at_element(id),
                ),
            }
        }
    }

    for table in &model.lookups {
        if let Err(msg) = table.check() {
            out.push(Diagnostic::new(codes::E_LOOKUP_TABLE, msg).at_element(table.id.as_str()));
        }
    }

    // qualitative links against quantitative references
    let mut declared: BTreeSet<(&str, &str)> = BTreeSet::new();
    for link in &model.links {
        let label = format!("{} -> {}", link.from, link.to);
        for end in [&link.from, &link.to] {
            if !is_value(end) {
                out.push(
                    Diagnostic::new(
                        codes::E_UNKNOWN_REF,
                        format!("link {label}: `{end}` is not a declared variable or stock"),
                    )
                    .at_element(link.to.as_str()),
                );
            }
        }
        if link.from == link.to {
            out.push(
                Diagnostic::new(
                    codes::W_SELF_LINK,
                    format!("link {label} is a self-influence"),
                )
                .at_element(link.to.as_str()),
            );
        }
        if !declared.insert((&link.from, &link.to)) {
            out.push(
                Diagnostic::new(codes::W_DUP_LINK, format!("link {label} declared twice"))
                    .at_element(link.to.as_str()),
            );
        }
    }
    let uses = references_by_target(model);
    for (from, to) in &declared {
        if !is_value(from) || !is_value(to) {
            continue;
        }
        let Some(deps) = uses.get(*to) else {
            continue;
        };
        if !deps.accepted.contains(*from) {
            out.push(
                Diagnostic::new(
                    codes::W_LINK_UNUSED,
                    format!("link {from} -> {to} is declared but `{to}` does not use `{from}`"),
                )
                .at_element(*to),
            );
        }
    }
    for (to, deps) in &uses {
        for from in &deps.required {
            if is_value(from) && !declared.contains(&(from.as_str(), to.as_str())) {
                out.push(
                    Diagnostic::new(
                        codes::W_LINK_MISSING,
                        format!("`{to}` uses `{from}` but no link {from} -> {to} is declared"),
                    )
                    .at_element(to.as_str()),
                );
            }
        }
    }

    // evaluation order only makes sense once references resolve
    let unresolved = out
        .iter()
        .any(|d| matches!(d.code.as_str(), "E-UNKNOWN-REF" | "E-REF-KIND" | "E-DUP-ID"));
    if !unresolved {
        if let Err(e) = evaluation_order(&build_dependency_graph(model)) {
            out.push(
                Diagnostic::new(
                    codes::E_ALGEBRAIC_LOOP,
                    format!(
                        "instantaneous cycle without stock or delay: {}",
                        e.cycle.join(" -> ")
                    ),
                )
                .at_element(e.cycle[0].as_str()),
            );
        }
    }

    let mut names = HashSet::new();
    for s in &model.scenarios {
        if !names.insert(s.name.as_str()) {
            out.push(Diagnostic::new(
                codes::E_SCENARIO,
                format!("scenario `{}` declared twice", s.name),
            ));
        }
        if !is_valid_identifier(&s.name) {
            out.push(Diagnostic::new(
                codes::E_BAD_ID,
                format!("scenario name `{}` is not a valid identifier", s.name),
            ));
        }
        if steps.is_some() {
            out.extend(check_scenario(model, s));
        }
    }
    let mut names = HashSet::new();
    for ind in &model.indicators {
        if !names.insert(ind.name.as_str()) {
            out.push(Diagnostic::new(
                codes::E_SCENARIO,
                format!("indicator `{}` declared twice", ind.name),
            ));
        }
        if !is_valid_identifier(&ind.name) {
            out.push(Diagnostic::new(
                codes::E_BAD_ID,
                format!("indicator name `{}` is not a valid identifier", ind.name),
            ));
        }
        if !is_value(&ind.target) {
            out.push(Diagnostic::new(
                codes::E_UNKNOWN_REF,
                format!("indicator `{}` targets unknown `{}`", ind.name, ind.target),
            ));
        }
        if let IndicatorKind::TimeToThreshold { threshold, .. } = ind.kind {
            if !threshold.is_finite() {
                out.push(Diagnostic::new(
                    codes::E_NONFINITE,
                    format!("indicator `{}` threshold is not finite", ind.name),
                ));
            }
        }
    }
    out
}

/// Check `delay_fixed`/`smooth` parameters against dt.
fn check_delay_params(model: &Model, owner: &str, expr: &Expr, out: &mut Vec<Diagnostic>) {
    let dt = model.time_spec.dt;
    for site in expr.delay_sites() {
        let Expr::Call(b, args) = site else { continue };
        let mut params = Vec::new();
        for p in &args[1..] {
            if p.is_time_dependent() {
                out.push(
                    Diagnostic::new(
                        codes::E_DELAY_PARAM,
                        format!("`{owner}`: {} parameter `{p}` depends on time", b.name()),
                    )
                    .at_element(owner),
                );
                return;
            }
            match eval_constant(model, p, model.time_spec.t_start) {
                Ok(v) => params.push(v),
                Err(msg) => {
                    out.push(
                        Diagnostic::new(
                            codes::E_DELAY_PARAM,
                            format!(
                                "`{owner}`: {} parameter `{p}` is not constant-evaluable ({msg})",
                                b.name()
                            ),
                        )
                        .at_element(owner),
                    );
                    return;
                }
            }
        }
        match b {
            Builtin::Smooth => {
                let tau = params[0];
                if !(tau >= dt) {
                    out.push(
                        Diagnostic::new(
                            codes::E_TAU_TOO_SMALL,
                            format!("`{owner}`: smooth time constant {tau} is below dt {dt}"),
                        )
                        .at_element(owner),
                    );
                }
            }
            Builtin::DelayFixed => {
                let d = params[0];
                let ratio = d / dt;
                let k = ratio.round();
                if !(k >= 1.0) {
                    out.push(
                        Diagnostic::new(
                            codes::E_DELAY_TOO_SMALL,
                            format!("`{owner}`: delay {d} is shorter than one step of dt {dt}"),
                        )
                        .at_element(owner),
                    );
                } else if (ratio - k).abs() > DELAY_GRID_TOLERANCE * k.max(1.0) {
                    out.push(
                        Diagnostic::new(
                            codes::W_DELAY_ROUND,
                            format!(
                                "`{owner}`: delay {d} rounded to {} ({} steps of dt {dt})",
                                k * dt,
                                k
                            ),
                        )
                        .at_element(owner),
                    );
                }
            }
            _ => {}
        }
    }
}

#[derive(Debug, Default)]
struct TargetRefs {
    /// references that should be mirrored by a declared link
    required: BTreeSet<String>,
    /// anything a link may legitimately point at
    accepted: BTreeSet<String>,
}

/// For each variable or stock with quantitative content, the ids it uses.
/// Data variables accept no links; unquantified auxiliaries are skipped.
fn references_by_target(model: &Model) -> BTreeMap<String, TargetRefs> {
    let mut map: BTreeMap<String, TargetRefs> = BTreeMap::new();
    for var in &model.variables {
        let entry = match (&var.kind, &var.expression) {
            (VariableKind::Auxiliary, None) => continue,
            (_, None) => map.entry(var.id.clone()).or_default(),
            (_, Some(e)) => {
                let entry = map.entry(var.id.clone()).or_default();
                collect_refs(e, entry);
                entry
            }
        };
        let _ = entry;
    }
    for stock in &model.stocks {
        let entry = map.entry(stock.id.clone()).or_default();
        for f in stock.inflows.iter().chain(&stock.outflows) {
            entry.required.insert(f.clone());
            entry.accepted.insert(f.clone());
        }
        for r in stock.initial.refs() {
            entry.accepted.insert(r.to_string());
        }
    }
    map
}

fn collect_refs(e: &Expr, into: &mut TargetRefs) {
    // delay parameters (time constants, initial values) are not influences
    fn walk(e: &Expr, param: bool, into: &mut TargetRefs) {
        match e {
            Expr::Literal(_) => {}
            Expr::Ref(id) => {
                into.accepted.insert(id.clone());
                if !param {
                    into.required.insert(id.clone());
                }
            }
            Expr::Unary(_, a) => walk(a, param, into),
            Expr::Binary(_, a, b) => {
                walk(a, param, into);
                walk(b, param, into);
            }
            Expr::Call(b, args) => {
                for (i, a) in args.iter().enumerate() {
                    walk(a, param || (b.is_delay() && i > 0), into);
                }
            }
            Expr::Lookup { arg, .. } => walk(arg, param, into),
        }
    }
    walk(e, false, into)
}

#[derive(Serialize)]
struct FingerprintView<'a> {
    id: &'a str,
    name: &'a str,
    time_spec: &'a crate::model::TimeSpec,
    variables: Vec<serde_json::Value>,
    stocks: Vec<serde_json::Value>,
    links: &'a [crate::model::InfluenceLink],
    lookups: Vec<(&'a str, &'a [(f64, f64)])>,
    data_bindings: &'a BTreeMap<String, crate::data::DataBinding>,
}

/// SHA-256 over the simulation-relevant content of a model, in hex.
///
/// Insensitive to element order, docs, notes, slider ranges, and the
/// scenarios and indicators declared alongside the model.
pub fn model_fingerprint(model: &Model) -> String {
    let m = model.canonicalized();
    let strip = |mut v: serde_json::Value| {
        if let Some(obj) = v.as_object_mut() {
            obj.remove("doc");
            obj.remove("slider");
        }
        v
    };
    let view = FingerprintView {
        id: &m.id,
        name: &m.name,
        time_spec: &m.time_spec,
        variables: m
            .variables
            .iter()
            .map(|v| strip(serde_json::to_value(v).unwrap()))
            .collect(),
        stocks: m
            .stocks
            .iter()
            .map(|s| strip(serde_json::to_value(s).unwrap()))
            .collect(),
        links: &m.links,
        lookups: m
            .lookups
            .iter()
            .map(|l| (l.id.as_str(), l.points.as_slice()))
            .collect(),
        data_bindings: &m.data_bindings,
    };
    let bytes = serde_json::to_vec(&view).expect("model serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
