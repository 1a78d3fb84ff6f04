use std::collections::{BTreeMap, HashSet};

use crate::diagnostics::{self as codes, has_errors, Diagnostic};
use crate::expr::{BinaryOp, Builtin, Expr};
use crate::model::{Model, VariableKind};

use super::{Action, Scenario};

/// Problems with `scenario` against `model`; empty when it can be applied.
pub fn check_scenario(model: &Model, scenario: &Scenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let name = &scenario.name;
    for (target, value) in &scenario.overrides {
        match model.variable(target) {
            None => out.push(
                Diagnostic::new(
                    codes::E_BAD_TARGET,
                    format!("scenario `{name}` overrides unknown `{target}`"),
                )
                .at_element(target.as_str()),
            ),
            Some(v) if v.kind != VariableKind::Constant => out.push(
                Diagnostic::new(
                    codes::E_OVERRIDE_NONCONST,
                    format!("scenario `{name}` overrides `{target}`, which is not a constant"),
                )
                .at_element(target.as_str()),
            ),
            Some(_) => {}
        }
        if !value.is_finite() {
            out.push(Diagnostic::new(
                codes::E_NONFINITE,
                format!("scenario `{name}`: override of `{target}` is not finite"),
            ));
        }
    }
    let (t0, t1) = (model.time_spec.t_start, model.time_spec.t_stop);
    let mut seen = HashSet::new();
    for iv in &scenario.interventions {
        let target = iv.target.as_str();
        match model.variable(target) {
            Some(v) if matches!(v.kind, VariableKind::Constant | VariableKind::Auxiliary) => {}
            Some(_) => out.push(
                Diagnostic::new(
                    codes::E_BAD_TARGET,
                    format!("scenario `{name}`: data variable `{target}` cannot receive interventions"),
                )
                .at_element(target),
            ),
            None if model.stock(target).is_some() => out.push(
                Diagnostic::new(
                    codes::E_BAD_TARGET,
                    format!("scenario `{name}`: stock `{target}` cannot receive interventions; target one of its flows"),
                )
                .at_element(target),
            ),
            None => out.push(
                Diagnostic::new(codes::E_BAD_TARGET, format!("scenario `{name}` targets unknown `{target}`"))
                    .at_element(target),
            ),
        }
        if !(iv.at_time >= t0 && iv.at_time <= t1) {
            out.push(
                Diagnostic::new(
                    codes::E_INTERVENTION_TIME,
                    format!("scenario `{name}`: intervention on `{target}` at {} lies outside [{t0}, {t1}]", iv.at_time),
                )
                .at_element(target),
            );
        }
        if !seen.insert((target, iv.at_time.to_bits())) {
            out.push(
                Diagnostic::new(
                    codes::E_INTERVENTION_DUP,
                    format!(
                        "scenario `{name}`: two interventions on `{target}` at {}",
                        iv.at_time
                    ),
                )
                .at_element(target),
            );
        }
        let amount = match iv.action {
            Action::Set { value } => value,
            Action::Scale { factor } => factor,
        };
        if !amount.is_finite() {
            out.push(Diagnostic::new(
                codes::E_NONFINITE,
                format!("scenario `{name}`: intervention on `{target}` is not finite"),
            ));
        }
    }
    out
}

fn after(at: f64) -> Expr {
    Expr::binary(
        BinaryOp::Ge,
        Expr::call(Builtin::Time, vec![]),
        Expr::lit(at),
    )
}

/// The model as the scenario sees it.
///
/// Overrides replace constant values. Interventions wrap the target's
/// expression in time switches, applied in time order: `set` replaces the
/// value from `at_time` on, `scale` multiplies it, so stacked scales
/// compose. A constant that receives an intervention becomes an auxiliary;
/// stock initial values that referenced it keep its original value.
/// The returned model carries no scenarios of its own.
pub fn apply_scenario(model: &Model, scenario: &Scenario) -> Result<Model, Vec<Diagnostic>> {
    let diags = check_scenario(model, scenario);
    if has_errors(&diags) {
        return Err(diags);
    }
    let mut m = model.clone();
    m.scenarios.clear();
    for (target, value) in &scenario.overrides {
        if let Some(v) = m.variable_mut(target) {
            v.expression = Some(Expr::lit(*value));
        }
    }
    let mut by_target: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for iv in &scenario.interventions {
        by_target.entry(&iv.target).or_default().push(iv);
    }
    let mut frozen: BTreeMap<String, Expr> = BTreeMap::new();
    for (target, mut ivs) in by_target {
        ivs.sort_by(|a, b| a.at_time.total_cmp(&b.at_time));
        let var = m.variable_mut(target).expect("checked target");
        let Some(mut e) = var.expression.clone() else {
            continue;
        };
        if var.kind == VariableKind::Constant {
            frozen.insert(target.to_string(), e.clone());
            var.kind = VariableKind::Auxiliary;
        }
        for iv in ivs {
            e = match iv.action {
                Action::Set { value } => Expr::call(
                    Builtin::IfThenElse,
                    vec![after(iv.at_time), Expr::lit(value), e],
                ),
                Action::Scale { factor } => Expr::binary(
                    BinaryOp::Mul,
                    e,
                    Expr::call(
                        Builtin::IfThenElse,
                        vec![after(iv.at_time), Expr::lit(factor), Expr::lit(1.0)],
                    ),
                ),
            };
        }
        var.expression = Some(e);
    }
    if !frozen.is_empty() {
        for s in &mut m.stocks {
            s.initial = s.initial.substitute(&|id| frozen.get(id).cloned());
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_expression, NoDelays};
    use crate::model::{Stock, TimeSpec, Variable};
    use crate::validate::model_fingerprint;

    fn base() -> Model {
        let mut m = Model::new("m", TimeSpec::new(0.0, 10.0, 1.0, ""));
        m.variables.push(Variable::constant("c", Expr::lit(1.0)));
        m.variables.push(Variable::auxiliary(
            "a",
            Expr::binary(BinaryOp::Mul, Expr::var("c"), Expr::lit(2.0)),
        ));
        m.stocks.push(Stock::new("s", Expr::var("c")).inflow("a"));
        m
    }

    fn value_at(m: &Model, id: &str, t: f64) -> f64 {
        let e = m.variable(id).unwrap().expression.as_ref().unwrap();
        eval_expression(e, &std::collections::HashMap::new(), t, &NoDelays).unwrap()
    }

    #[test]
    fn override_replaces_constant() {
        let m = apply_scenario(&base(), &Scenario::new("x").with_override("c", 2.0)).unwrap();
        assert_eq!(value_at(&m, "c", 0.0), 2.0);
        assert_eq!(value_at(&m, "c", 10.0), 2.0);
    }

    #[test]
    fn set_is_piecewise() {
        let s = Scenario::new("x").with_intervention("c", 5.0, Action::Set { value: 9.0 });
        let m = apply_scenario(&base(), &s).unwrap();
        assert_eq!(value_at(&m, "c", 4.0), 1.0);
        assert_eq!(value_at(&m, "c", 5.0), 9.0);
        assert_eq!(m.variable("c").unwrap().kind, VariableKind::Auxiliary);
        assert_eq!(m.stock("s").unwrap().initial, Expr::lit(1.0));
    }

    #[test]
    fn scales_compose() {
        let s = Scenario::new("x")
            .with_intervention("c", 6.0, Action::Scale { factor: 3.0 })
            .with_intervention("c", 2.0, Action::Scale { factor: 2.0 });
        let m = apply_scenario(&base(), &s).unwrap();
        assert_eq!(value_at(&m, "c", 1.0), 1.0);
        assert_eq!(value_at(&m, "c", 2.0), 2.0);
        assert_eq!(value_at(&m, "c", 7.0), 6.0);
    }

    #[test]
    fn fingerprint_changes_iff_non_empty() {
        let m = base();
        let same = apply_scenario(&m, &Scenario::baseline()).unwrap();
        assert_eq!(model_fingerprint(&m), model_fingerprint(&same));
        let other = apply_scenario(&m, &Scenario::new("x").with_override("c", 3.0)).unwrap();
        assert_ne!(model_fingerprint(&m), model_fingerprint(&other));
    }

    #[test]
    fn target_errors() {
        let m = base();
        let code = |s: Scenario| apply_scenario(&m, &s).unwrap_err()[0].code.clone();
        assert_eq!(
            code(Scenario::new("x").with_override("nope", 1.0)),
            "E-BAD-TARGET"
        );
        assert_eq!(
            code(Scenario::new("x").with_override("a", 1.0)),
            "E-OVERRIDE-NONCONST"
        );
        assert_eq!(
            code(Scenario::new("x").with_intervention("s", 1.0, Action::Set { value: 0.0 })),
            "E-BAD-TARGET"
        );
        assert_eq!(
            code(Scenario::new("x").with_intervention("a", 11.0, Action::Set { value: 0.0 })),
            "E-INTERVENTION-TIME"
        );
        let dup = Scenario::new("x")
            .with_intervention("a", 1.0, Action::Set { value: 0.0 })
            .with_intervention("a", 1.0, Action::Scale { factor: 2.0 });
        assert_eq!(code(dup), "E-INTERVENTION-DUP");
    }
}
