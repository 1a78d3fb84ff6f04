//! Expression trees, the pure evaluator and the canonical printer.
//!
//! All values are `f64`. Comparisons and logical operators yield `1.0` or
//! `0.0`; any non-zero value counts as true.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::data::LookupTable;
use crate::diagnostics as codes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge
            | BinaryOp::Eq
            | BinaryOp::Ne => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul | BinaryOp::Div => 5,
            BinaryOp::Pow => PREC_POW,
        }
    }
}

pub(crate) const PREC_UNARY: u8 = 6;
pub(crate) const PREC_POW: u8 = 7;
const PREC_ATOM: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Min,
    Max,
    Clamp,
    Abs,
    IfThenElse,
    Step,
    Pulse,
    Ramp,
    Time,
    DelayFixed,
    Smooth,
}

impl Builtin {
    pub const ALL: [Builtin; 11] = [
        Builtin::Min,
        Builtin::Max,
        Builtin::Clamp,
        Builtin::Abs,
        Builtin::IfThenElse,
        Builtin::Step,
        Builtin::Pulse,
        Builtin::Ramp,
        Builtin::Time,
        Builtin::DelayFixed,
        Builtin::Smooth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Clamp => "clamp",
            Builtin::Abs => "abs",
            Builtin::IfThenElse => "if_then_else",
            Builtin::Step => "step",
            Builtin::Pulse => "pulse",
            Builtin::Ramp => "ramp",
            Builtin::Time => "time",
            Builtin::DelayFixed => "delay_fixed",
            Builtin::Smooth => "smooth",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Time => 0,
            Builtin::Abs => 1,
            Builtin::Min | Builtin::Max | Builtin::Step | Builtin::Ramp => 2,
            Builtin::Clamp
            | Builtin::IfThenElse
            | Builtin::Pulse
            | Builtin::DelayFixed
            | Builtin::Smooth => 3,
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    /// `delay_fixed` and `smooth` keep state between steps.
    pub fn is_delay(self) -> bool {
        matches!(self, Builtin::DelayFixed | Builtin::Smooth)
    }

    pub fn is_time_dependent(self) -> bool {
        matches!(
            self,
            Builtin::Step
                | Builtin::Pulse
                | Builtin::Ramp
                | Builtin::Time
                | Builtin::DelayFixed
                | Builtin::Smooth
        )
    }
}

/// Names that cannot be used as identifiers.
pub const RESERVED_WORDS: &[&str] = &["and", "or", "not", "lookup"];

pub fn is_reserved(name: &str) -> bool {
    RESERVED_WORDS.contains(&name) || Builtin::from_name(name).is_some()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(f64),
    Ref(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    Lookup { table: String, arg: Box<Expr> },
}

impl Expr {
    pub fn lit(v: f64) -> Expr {
        Expr::Literal(v)
    }

    pub fn var(id: impl Into<String>) -> Expr {
        Expr::Ref(id.into())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::Unary(UnaryOp::Neg, Box::new(e))
    }

    pub fn call(b: Builtin, args: Vec<Expr>) -> Expr {
        Expr::Call(b, args)
    }

    /// Visit every reference with a flag telling whether it sits in the
    /// state input of a `delay_fixed`/`smooth` call (first argument).
    pub fn visit_refs<'a>(&'a self, f: &mut impl FnMut(&'a str, bool)) {
        self.visit_refs_inner(false, f)
    }

    fn visit_refs_inner<'a>(&'a self, lagged: bool, f: &mut impl FnMut(&'a str, bool)) {
        match self {
            Expr::Literal(_) => {}
            Expr::Ref(id) => f(id, lagged),
            Expr::Unary(_, e) => e.visit_refs_inner(lagged, f),
            Expr::Binary(_, a, b) => {
                a.visit_refs_inner(lagged, f);
                b.visit_refs_inner(lagged, f);
            }
            Expr::Call(b, args) => {
                for (i, a) in args.iter().enumerate() {
                    a.visit_refs_inner(lagged || (b.is_delay() && i == 0), f);
                }
            }
            Expr::Lookup { arg, .. } => arg.visit_refs_inner(lagged, f),
        }
    }

    pub fn refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_refs(&mut |id, _| out.push(id));
        out
    }

    pub fn has_refs(&self) -> bool {
        let mut any = false;
        self.visit_refs(&mut |_, _| any = true);
        any
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Literal(_) | Expr::Ref(_) => {}
            Expr::Unary(_, e) => e.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            Expr::Lookup { arg, .. } => arg.visit(f),
        }
    }

    pub fn lookup_tables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Lookup { table, .. } = e {
                out.push(table.as_str());
            }
        });
        out
    }

    pub fn is_time_dependent(&self) -> bool {
        let mut dep = false;
        self.visit(&mut |e| {
            if let Expr::Call(b, _) = e {
                dep |= b.is_time_dependent();
            }
        });
        dep
    }

    /// Delay-family call sites in pre-order. Site `k` of an expression is
    /// the k-th entry; evaluation addresses state by this index.
    pub fn delay_sites(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Call(b, _) = e {
                if b.is_delay() {
                    out.push(e);
                }
            }
        });
        out
    }

    pub fn delay_site_count(&self) -> usize {
        self.delay_sites().len()
    }

    /// All literal values, used by validation to reject NaN/inf.
    pub fn literals(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Literal(v) = e {
                out.push(*v);
            }
        });
        out
    }

    /// Replace references with other expressions.
    pub fn substitute(&self, subst: &impl Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Literal(v) => Expr::Literal(*v),
            Expr::Ref(id) => subst(id).unwrap_or_else(|| Expr::Ref(id.clone())),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.substitute(subst))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(subst)),
                Box::new(b.substitute(subst)),
            ),
            Expr::Call(b, args) => {
                Expr::Call(*b, args.iter().map(|a| a.substitute(subst)).collect())
            }
            Expr::Lookup { table, arg } => Expr::Lookup {
                table: table.clone(),
                arg: Box::new(arg.substitute(subst)),
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Literal(v) if v.is_sign_negative() => PREC_UNARY,
            Expr::Literal(_) | Expr::Ref(_) | Expr::Call(..) | Expr::Lookup { .. } => PREC_ATOM,
            Expr::Unary(..) => PREC_UNARY,
            Expr::Binary(op, ..) => op.precedence(),
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Shortest decimal rendering that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => f.write_str(&format_number(*v)),
            Expr::Ref(id) => f.write_str(id),
            Expr::Unary(UnaryOp::Neg, e) => {
                // `-2` would read back as a negative literal, keep the node
                if matches!(**e, Expr::Literal(v) if !v.is_sign_negative()) {
                    write!(f, "-({e})")
                } else {
                    f.write_str("-")?;
                    e.write_child(f, PREC_UNARY)
                }
            }
            Expr::Unary(UnaryOp::Not, e) => {
                f.write_str("not ")?;
                e.write_child(f, PREC_UNARY)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                if *op == BinaryOp::Pow {
                    // right associative; exponent is parsed at unary level
                    a.write_child(f, PREC_POW + 1)?;
                    f.write_str("^")?;
                    b.write_child(f, PREC_UNARY)
                } else {
                    a.write_child(f, p)?;
                    write!(f, " {} ", op.symbol())?;
                    b.write_child(f, p + 1)
                }
            }
            Expr::Call(b, args) => {
                write!(f, "{}(", b.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Lookup { table, arg } => write!(f, "lookup({table}, {arg})"),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        crate::dsl::parse_expression(&text).map_err(|diags| {
            let msg = diags.first().map(|d| d.message.clone()).unwrap_or_default();
            serde::de::Error::custom(format!("invalid expression `{text}`: {msg}"))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown reference `{0}`")]
    UnknownRef(String),
    #[error("unknown lookup table `{0}`")]
    UnknownTable(String),
    #[error("no state for delay call site {0}")]
    MissingDelayState(usize),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::DivZero => codes::E_DIV_ZERO,
            EvalError::Domain(_) => codes::E_DOMAIN,
            EvalError::UnknownRef(_) | EvalError::MissingDelayState(_) => codes::E_UNKNOWN_REF,
            EvalError::UnknownTable(_) => codes::E_UNKNOWN_REF,
        }
    }
}

/// Values visible to an expression at one instant.
pub trait Env {
    fn value(&self, id: &str) -> Option<f64>;

    fn table(&self, _id: &str) -> Option<&LookupTable> {
        None
    }
}

impl Env for HashMap<String, f64> {
    fn value(&self, id: &str) -> Option<f64> {
        self.get(id).copied()
    }
}

impl Env for BTreeMap<String, f64> {
    fn value(&self, id: &str) -> Option<f64> {
        self.get(id).copied()
    }
}

impl<E: Env + ?Sized> Env for &E {
    fn value(&self, id: &str) -> Option<f64> {
        (**self).value(id)
    }

    fn table(&self, id: &str) -> Option<&LookupTable> {
        (**self).table(id)
    }
}

/// Environment with lookup tables attached.
pub struct WithTables<'a, E> {
    pub env: E,
    pub tables: &'a [LookupTable],
}

impl<E: Env> Env for WithTables<'_, E> {
    fn value(&self, id: &str) -> Option<f64> {
        self.env.value(id)
    }

    fn table(&self, id: &str) -> Option<&LookupTable> {
        self.tables.iter().find(|t| t.id == id)
    }
}

/// Read access to the current output of each delay-family call site.
pub trait DelayStateView {
    fn output(&self, site: usize) -> Option<f64>;
}

/// For expressions without `delay_fixed`/`smooth`.
pub struct NoDelays;

impl DelayStateView for NoDelays {
    fn output(&self, _site: usize) -> Option<f64> {
        None
    }
}

impl DelayStateView for [f64] {
    fn output(&self, site: usize) -> Option<f64> {
        self.get(site).copied()
    }
}

impl DelayStateView for Vec<f64> {
    fn output(&self, site: usize) -> Option<f64> {
        self.get(site).copied()
    }
}

/// Evaluate `expr` at time `t`.
///
/// `if_then_else` only evaluates the selected branch. Delay-family calls do
/// not evaluate their arguments here: they answer with the state of their
/// call site, which the engine advances separately.
pub fn eval_expression(
    expr: &Expr,
    env: &impl Env,
    t: f64,
    state: &(impl DelayStateView + ?Sized),
) -> Result<f64, EvalError> {
    Evaluator {
        env,
        t,
        state,
        base: 0,
    }
    .eval(expr, &mut 0)
}

/// Like [`eval_expression`] for a sub-expression whose first delay site has
/// global index `first_site`.
pub(crate) fn eval_at_site(
    expr: &Expr,
    env: &impl Env,
    t: f64,
    state: &(impl DelayStateView + ?Sized),
    first_site: usize,
) -> Result<f64, EvalError> {
    Evaluator {
        env,
        t,
        state,
        base: first_site,
    }
    .eval(expr, &mut 0)
}

struct Evaluator<'a, E: ?Sized, S: ?Sized> {
    env: &'a E,
    t: f64,
    state: &'a S,
    base: usize,
}

fn truth(v: f64) -> bool {
    v != 0.0
}

fn boolean(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl<E: Env + ?Sized, S: DelayStateView + ?Sized> Evaluator<'_, E, S> {
    fn eval(&self, expr: &Expr, site: &mut usize) -> Result<f64, EvalError> {
        match expr {
            Expr::Literal(v) => Ok(*v),
            Expr::Ref(id) => self
                .env
                .value(id)
                .ok_or_else(|| EvalError::UnknownRef(id.clone())),
            Expr::Unary(UnaryOp::Neg, e) => Ok(-self.eval(e, site)?),
            Expr::Unary(UnaryOp::Not, e) => Ok(boolean(!truth(self.eval(e, site)?))),
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, site)?;
                let y = self.eval(b, site)?;
                binary(*op, x, y)
            }
            Expr::Lookup { table, arg } => {
                let x = self.eval(arg, site)?;
                let tbl = self
                    .env
                    .table(table)
                    .ok_or_else(|| EvalError::UnknownTable(table.clone()))?;
                Ok(tbl.eval(x))
            }
            Expr::Call(b, args) if b.is_delay() => {
                let idx = *site;
                *site += 1 + args.iter().map(Expr::delay_site_count).sum::<usize>();
                self.state
                    .output(self.base + idx)
                    .ok_or(EvalError::MissingDelayState(self.base + idx))
            }
            Expr::Call(Builtin::IfThenElse, args) => {
                let cond = self.eval(&args[0], site)?;
                let (taken, skipped) = if truth(cond) { (1, 2) } else { (2, 1) };
                // sites in the skipped branch still occupy indices
                let skip = args[skipped].delay_site_count();
                if taken == 1 {
                    let v = self.eval(&args[1], site)?;
                    *site += skip;
                    Ok(v)
                } else {
                    *site += skip;
                    self.eval(&args[2], site)
                }
            }
            Expr::Call(b, args) => {
                let mut vals = [0.0; 3];
                for (slot, a) in vals.iter_mut().zip(args) {
                    *slot = self.eval(a, site)?;
                }
                self.call(*b, &vals[..args.len()])
            }
        }
    }

    fn call(&self, b: Builtin, v: &[f64]) -> Result<f64, EvalError> {
        let t = self.t;
        Ok(match b {
            Builtin::Min => v[0].min(v[1]),
            Builtin::Max => v[0].max(v[1]),
            Builtin::Clamp => {
                if v[1] > v[2] {
                    return Err(EvalError::Domain(format!(
                        "clamp lower bound {} exceeds upper bound {}",
                        v[1], v[2]
                    )));
                }
                v[0].max(v[1]).min(v[2])
            }
            Builtin::Abs => v[0].abs(),
            Builtin::Step => {
                if t >= v[1] {
                    v[0]
                } else {
                    0.0
                }
            }
            Builtin::Pulse => {
                if t >= v[1] && t < v[1] + v[2] {
                    v[0]
                } else {
                    0.0
                }
            }
            Builtin::Ramp => v[0] * (t - v[1]).max(0.0),
            Builtin::Time => t,
            Builtin::IfThenElse | Builtin::DelayFixed | Builtin::Smooth => {
                unreachable!("handled in eval")
            }
        })
    }
}

fn binary(op: BinaryOp, x: f64, y: f64) -> Result<f64, EvalError> {
    Ok(match op {
        BinaryOp::Add => x + y,
        BinaryOp::Sub => x - y,
        BinaryOp::Mul => x * y,
        BinaryOp::Div => {
            if y == 0.0 {
                return Err(EvalError::DivZero);
            }
            x / y
        }
        BinaryOp::Pow => {
            if x < 0.0 && y.fract() != 0.0 {
                return Err(EvalError::Domain(format!(
                    "{x}^{y}: negative base with non-integer exponent"
                )));
            }
            if x == 0.0 && y < 0.0 {
                return Err(EvalError::Domain(format!(
                    "0^{y}: zero base with negative exponent"
                )));
            }
            x.powf(y)
        }
        BinaryOp::Lt => boolean(x < y),
        BinaryOp::Le => boolean(x <= y),
        BinaryOp::Gt => boolean(x > y),
        BinaryOp::Ge => boolean(x >= y),
        BinaryOp::Eq => boolean(x == y),
        BinaryOp::Ne => boolean(x != y),
        BinaryOp::And => boolean(truth(x) && truth(y)),
        BinaryOp::Or => boolean(truth(x) || truth(y)),
    })
}
