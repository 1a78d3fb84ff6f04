//! Random models for property tests.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use magnitude::data::{DataBinding, DataSource, Extrapolation, Interpolation, LookupTable};
use magnitude::expr::{BinaryOp, Builtin, Expr, UnaryOp};
use magnitude::model::{
    EffectOrder, InfluenceLink, Polarity, QuantificationSource, SliderRange, SourceTag, Stock,
    TimeSpec, Variable,
};
use magnitude::sim::{Action, Direction, Indicator, IndicatorKind, Scenario};
use magnitude::Model;

const TEXTS: &[&str] = &[
    "",
    "plain",
    "with \"quotes\"",
    "back\\slash",
    "ünïcödé ✓",
    "tab\there",
    "a, b; c",
];
const UNITS: &[&str] = &["", "1", "kg", "items/month", "kgCO2/(item*km)"];

fn text(rng: &mut impl Rng) -> String {
    TEXTS.choose(rng).unwrap().to_string()
}

fn literal(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..5) {
        0 => rng.gen_range(0..100) as f64,
        1 => rng.gen_range(0.0..1.0),
        2 => rng.gen_range(0.0..1e6),
        3 => 10f64.powi(rng.gen_range(-12..20)) * rng.gen_range(1.0..10.0),
        _ => (rng.gen_range(0..1000) as f64) / 8.0,
    }
}

fn polarity(rng: &mut impl Rng) -> Polarity {
    *[
        Polarity::Positive,
        Polarity::Negative,
        Polarity::Unspecified,
    ]
    .choose(rng)
    .unwrap()
}

fn order(rng: &mut impl Rng) -> EffectOrder {
    *EffectOrder::ALL.choose(rng).unwrap()
}

fn provenance(rng: &mut impl Rng) -> Option<QuantificationSource> {
    rng.gen_bool(0.5).then(|| QuantificationSource {
        tag: *SourceTag::ALL.choose(rng).unwrap(),
        citation: text(rng),
    })
}

/// Constant-only expression: literals, constants and constant arithmetic.
fn const_expr(rng: &mut impl Rng, consts: &[String], depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.5) {
        return if !consts.is_empty() && rng.gen_bool(0.4) {
            Expr::var(consts.choose(rng).unwrap())
        } else {
            Expr::lit(literal(rng))
        };
    }
    let op = *[BinaryOp::Add, BinaryOp::Mul, BinaryOp::Sub]
        .choose(rng)
        .unwrap();
    Expr::binary(
        op,
        const_expr(rng, consts, depth - 1),
        const_expr(rng, consts, depth - 1),
    )
}

struct Scope<'a> {
    refs: &'a [String],
    consts: &'a [String],
    lookups: &'a [String],
}

fn expr(rng: &mut impl Rng, scope: &Scope, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..4) {
            0 | 1 if !scope.refs.is_empty() => Expr::var(scope.refs.choose(rng).unwrap()),
            2 => Expr::call(Builtin::Time, vec![]),
            _ => Expr::lit(literal(rng)),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..10) {
        0 => Expr::Unary(
            *[UnaryOp::Neg, UnaryOp::Not].choose(rng).unwrap(),
            Box::new(expr(rng, scope, d)),
        ),
        1 if !scope.lookups.is_empty() => Expr::Lookup {
            table: scope.lookups.choose(rng).unwrap().clone(),
            arg: Box::new(expr(rng, scope, d)),
        },
        2 => {
            let b = *Builtin::ALL
                .iter()
                .filter(|b| !b.is_delay())
                .collect::<Vec<_>>()
                .choose(rng)
                .unwrap();
            Expr::call(*b, (0..b.arity()).map(|_| expr(rng, scope, d)).collect())
        }
        3 => {
            let b = if rng.gen_bool(0.5) {
                Builtin::Smooth
            } else {
                Builtin::DelayFixed
            };
            let param = Expr::binary(BinaryOp::Add, Expr::lit(1.0), const_expr(rng, &[], 0));
            Expr::call(
                b,
                vec![expr(rng, scope, d), param, const_expr(rng, scope.consts, 1)],
            )
        }
        _ => {
            let ops = [
                BinaryOp::Add,
                BinaryOp::Sub,
                BinaryOp::Mul,
                BinaryOp::Div,
                BinaryOp::Pow,
                BinaryOp::Lt,
                BinaryOp::Le,
                BinaryOp::Gt,
                BinaryOp::Ge,
                BinaryOp::Eq,
                BinaryOp::Ne,
                BinaryOp::And,
                BinaryOp::Or,
            ];
            Expr::binary(
                *ops.choose(rng).unwrap(),
                expr(rng, scope, d),
                expr(rng, scope, d),
            )
        }
    }
}

fn points(rng: &mut impl Rng, n: usize) -> Vec<(f64, f64)> {
    let mut x = rng.gen_range(-5.0..5.0);
    (0..n)
        .map(|_| {
            x += rng.gen_range(0.1..3.0);
            (x, literal(rng))
        })
        .collect()
}

/// A random valid model exercising every kind of element and statement.
pub fn random_model(rng: &mut impl Rng) -> Model {
    let t_start = rng.gen_range(-10..10) as f64;
    let dt = *[1.0, 0.5, 0.25, 0.1].choose(rng).unwrap();
    let steps = rng.gen_range(1..40);
    let mut m = Model::new(
        format!("m{}", rng.gen_range(0..1000)),
        TimeSpec::new(
            t_start,
            t_start + dt * steps as f64,
            dt,
            *["", "month", "year"].choose(rng).unwrap(),
        ),
    );
    m.name = text(rng);
    m.notes = (0..rng.gen_range(0..3))
        .map(|i| format!("note {i} {}", TEXTS[1 + i % 6]))
        .collect::<Vec<_>>()
        .join("\n");

    let mut consts = Vec::new();
    for i in 0..rng.gen_range(0..5) {
        let id = format!("c{i}");
        let mut v = Variable::constant(&id, Expr::lit(literal(rng)));
        v.provenance = provenance(rng);
        v.unit = UNITS.choose(rng).unwrap().to_string();
        v.doc = text(rng);
        v.name = text(rng);
        if rng.gen_bool(0.3) {
            v.slider = Some(SliderRange {
                min: 0.0,
                max: literal(rng) + 1.0,
            });
        }
        m.variables.push(v);
        consts.push(id);
    }
    let mut lookups = Vec::new();
    for i in 0..rng.gen_range(0..3) {
        let id = format!("tbl{i}");
        let mut t = LookupTable::new(&id, {
            let n = rng.gen_range(2..6);
            points(rng, n)
        });
        t.doc = text(rng);
        m.lookups.push(t);
        lookups.push(id);
    }
    let mut refs: Vec<String> = consts.clone();
    for i in 0..rng.gen_range(0..3) {
        let id = format!("d{i}");
        let mut v = Variable::exogenous(&id);
        v.provenance = provenance(rng);
        let mut binding = if rng.gen_bool(0.5) {
            {
                let n = rng.gen_range(1..5);
                DataBinding::inline(points(rng, n))
            }
        } else {
            let mut b = DataBinding::file(format!("data/{id}.csv"), "value");
            if let DataSource::File { time_column, .. } = &mut b.source {
                if rng.gen_bool(0.5) {
                    *time_column = "month".into();
                }
            }
            b
        };
        binding.interp = if rng.gen_bool(0.5) {
            Interpolation::Linear
        } else {
            Interpolation::Hold
        };
        binding.extrapolation = if rng.gen_bool(0.5) {
            Extrapolation::Error
        } else {
            Extrapolation::HoldEnds
        };
        m.data_bindings.insert(id.clone(), binding);
        m.variables.push(v);
        refs.push(id);
    }
    let n_stocks = rng.gen_range(0..3);
    let stock_ids: Vec<String> = (0..n_stocks).map(|i| format!("s{i}")).collect();
    refs.extend(stock_ids.iter().cloned());
    let mut auxes = Vec::new();
    for i in 0..rng.gen_range(0..6) {
        let id = format!("a{i}");
        let scope = Scope {
            refs: &refs,
            consts: &consts,
            lookups: &lookups,
        };
        let mut v = Variable::auxiliary(&id, expr(rng, &scope, 3));
        v.unit = UNITS.choose(rng).unwrap().to_string();
        v.doc = text(rng);
        m.variables.push(v);
        refs.push(id.clone());
        auxes.push(id);
    }
    let flows: Vec<String> = auxes.iter().chain(&consts).cloned().collect();
    for id in &stock_ids {
        let mut s = Stock::new(id, const_expr(rng, &consts, 2));
        for f in &flows {
            match rng.gen_range(0..6) {
                0 => s.inflows.push(f.clone()),
                1 => s.outflows.push(f.clone()),
                _ => {}
            }
        }
        s.non_negative = rng.gen_bool(0.5);
        s.unit = UNITS.choose(rng).unwrap().to_string();
        s.provenance = provenance(rng);
        s.doc = text(rng);
        m.stocks.push(s);
    }

    let nodes: Vec<String> = m
        .variables
        .iter()
        .map(|v| v.id.clone())
        .chain(stock_ids.iter().cloned())
        .collect();
    if nodes.len() >= 2 {
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..rng.gen_range(0..8) {
            let from = nodes.choose(rng).unwrap().clone();
            let to = nodes.choose(rng).unwrap().clone();
            if from == to || !seen.insert((from.clone(), to.clone())) {
                continue;
            }
            let mut l = InfluenceLink::new(from, to, polarity(rng));
            l.delayed = rng.gen_bool(0.3);
            l.effect_order = order(rng);
            m.links.push(l);
        }
    }

    let targets: Vec<String> = consts.iter().chain(&auxes).cloned().collect();
    for i in 0..rng.gen_range(0..3) {
        let mut s = Scenario::new(format!("sc{i}"));
        s.description = text(rng);
        if !consts.is_empty() && rng.gen_bool(0.5) {
            s.overrides
                .insert(consts.choose(rng).unwrap().clone(), literal(rng));
        }
        let mut times = BTreeMap::new();
        for _ in 0..rng.gen_range(0..3) {
            let Some(target) = targets.choose(rng) else {
                break;
            };
            let at = m.time_spec.t_start + dt * rng.gen_range(0..=steps) as f64;
            if times.insert((target.clone(), at.to_bits()), ()).is_some() {
                continue;
            }
            let action = if rng.gen_bool(0.5) {
                Action::Set {
                    value: literal(rng),
                }
            } else {
                Action::Scale {
                    factor: literal(rng),
                }
            };
            s = s.with_intervention(target.clone(), at, action);
        }
        m.scenarios.push(s);
    }
    for i in 0..rng.gen_range(0..3) {
        let Some(target) = nodes.choose(rng) else {
            break;
        };
        let kind = match rng.gen_range(0..5) {
            0 => IndicatorKind::FinalValue,
            1 => IndicatorKind::Cumulative,
            2 => IndicatorKind::Peak,
            3 => IndicatorKind::Average,
            _ => IndicatorKind::TimeToThreshold {
                threshold: literal(rng),
                direction: if rng.gen_bool(0.5) {
                    Direction::Rising
                } else {
                    Direction::Falling
                },
            },
        };
        m.indicators
            .push(Indicator::new(format!("ind{i}"), target.clone(), kind));
    }
    m
}

/// Node ids `n0..n{count}` as expression-less auxiliaries.
pub fn nodes_model(count: usize) -> Model {
    let mut m = Model::new("g", TimeSpec::default());
    for i in 0..count {
        let mut v = Variable::auxiliary(format!("n{i}"), Expr::lit(0.0));
        v.expression = None;
        m.variables.push(v);
    }
    m
}

/// Random link graph over at most `max_nodes` nodes.
pub fn random_link_graph(rng: &mut impl Rng, max_nodes: usize) -> Model {
    let count = rng.gen_range(1..=max_nodes);
    let density = rng.gen_range(0.1..0.45);
    let mut m = nodes_model(count);
    for a in 0..count {
        for b in 0..count {
            if rng.gen_bool(density) {
                let mut l = InfluenceLink::new(format!("n{a}"), format!("n{b}"), polarity(rng));
                l.delayed = rng.gen_bool(0.2);
                m.links.push(l);
            }
        }
    }
    m
}

/// A ring `x0 -> x1 -> ... -> x0` of auxiliaries with no lag, plus a few
/// acyclic bystanders feeding into it.
pub fn instantaneous_ring(rng: &mut impl Rng, len: usize) -> Model {
    let mut m = Model::new("ring", TimeSpec::new(0.0, 5.0, 1.0, ""));
    let ids: Vec<String> = (0..len).map(|i| format!("x{i}")).collect();
    for b in 0..rng.gen_range(0..3) {
        m.variables
            .push(Variable::constant(format!("k{b}"), Expr::lit(literal(rng))));
    }
    for (i, id) in ids.iter().enumerate() {
        let prev = &ids[(i + len - 1) % len];
        let mut e = Expr::binary(BinaryOp::Mul, Expr::lit(0.5), Expr::var(prev));
        if i == 0 && !m.variables.is_empty() {
            e = Expr::binary(BinaryOp::Add, e, Expr::var(m.variables[0].id.clone()));
        }
        m.variables.push(Variable::auxiliary(id.clone(), e));
    }
    m
}
