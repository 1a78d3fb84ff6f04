use std::collections::BTreeMap;

use super::lexer::{lex, Tok, Token};
use crate::data::{DataBinding, DataSource, Extrapolation, Interpolation, LookupTable};
use crate::diagnostics::{self as codes, Diagnostic, Span};
use crate::expr::{BinaryOp, Builtin, Expr, UnaryOp};
use crate::model::{
    EffectOrder, InfluenceLink, Model, Polarity, QuantificationSource, SliderRange, SourceTag,
    Stock, TimeSpec, Variable, VariableKind,
};
use crate::sim::{Action, Direction, Indicator, IndicatorKind, Intervention, Scenario};

const MAX_SYNTAX_ERRORS: usize = 50;

/// Source positions gathered while parsing, used to place diagnostics.
#[derive(Debug, Default, Clone)]
pub struct SpanIndex {
    /// statement span for every element declaration, in file order
    pub declarations: Vec<(String, Span)>,
    /// `(element, referenced name, span)` for every name used by an element
    pub references: Vec<(String, String, Span)>,
    pub links: Vec<(String, String, Span)>,
    pub header: Option<Span>,
}

impl SpanIndex {
    pub fn declaration(&self, id: &str) -> Option<Span> {
        self.declarations
            .iter()
            .find(|(d, _)| d == id)
            .map(|(_, s)| *s)
    }
}

type PResult<T> = Result<T, Diagnostic>;

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pub diags: Vec<Diagnostic>,
    pub spans: SpanIndex,
    current_element: Option<String>,
}

fn syntax(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(codes::E_SYNTAX, msg).at_span(span)
}

impl Parser {
    pub fn new(text: &str) -> Self {
        let (toks, diags) = lex(text);
        Parser {
            toks,
            pos: 0,
            diags,
            spans: SpanIndex::default(),
            current_element: None,
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.at_word(word) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> PResult<Span> {
        if self.at(tok) {
            Ok(self.bump().span)
        } else {
            Err(syntax(
                self.span(),
                format!(
                    "expected `{}`, found {}",
                    tok.symbol(),
                    self.peek().describe()
                ),
            ))
        }
    }

    fn expect_word(&mut self, word: &str) -> PResult<()> {
        if self.eat_word(word) {
            Ok(())
        } else {
            Err(syntax(
                self.span(),
                format!("expected `{word}`, found {}", self.peek().describe()),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(w) => {
                let span = self.bump().span;
                Ok((w, span))
            }
            other => Err(syntax(
                self.span(),
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    /// An identifier that names an element; the use is recorded for spans.
    fn reference(&mut self, what: &str) -> PResult<String> {
        let (name, span) = self.ident(what)?;
        if let Some(el) = &self.current_element {
            self.spans.references.push((el.clone(), name.clone(), span));
        }
        Ok(name)
    }

    /// Hyphenated tag such as `first-order` or `expert-hypothesis`.
    fn tag(&mut self, what: &str) -> PResult<(String, Span)> {
        let (mut word, start) = self.ident(what)?;
        let mut end = start;
        while self.at(&Tok::Minus) {
            let minus = self.span();
            if minus.column != end.end_column || minus.line != end.line {
                break;
            }
            match self.peek_at(1).clone() {
                Tok::Ident(next) if self.toks[self.pos + 1].span.column == minus.end_column => {
                    self.bump();
                    end = self.bump().span;
                    word.push('-');
                    word.push_str(&next);
                }
                _ => break,
            }
        }
        Ok((word, start.to(end)))
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(syntax(
                self.span(),
                format!("expected {what} string, found {}", other.describe()),
            )),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Number(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            ref other => Err(syntax(
                self.span(),
                format!("expected number, found {}", other.describe()),
            )),
        }
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof => Ok(()),
            other => Err(syntax(
                self.span(),
                format!("unexpected {} at end of statement", other.describe()),
            )),
        }
    }

    fn skip_line(&mut self) {
        while !matches!(self.peek(), Tok::Newline | Tok::Eof) {
            self.bump();
        }
        self.eat(&Tok::Newline);
    }

    fn skip_newlines(&mut self) {
        while self.eat(&Tok::Newline) {}
    }

    pub(crate) fn eat_newline(&mut self) -> bool {
        self.eat(&Tok::Newline)
    }

    pub(crate) fn at_eof(&self) -> bool {
        self.at(&Tok::Eof)
    }

    pub(crate) fn here(&self) -> Span {
        self.span()
    }

    // ---- expressions ----

    pub fn expression(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn binary_level(
        &mut self,
        ops: &[(Tok, BinaryOp)],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut lhs = next(self)?;
        loop {
            let Some(op) = ops.iter().find(|(t, _)| self.at(t)).map(|(_, op)| *op) else {
                return Ok(lhs);
            };
            let op_span = self.bump().span;
            let rhs = self.operand_after(op_span, op.symbol(), next)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn operand_after(
        &mut self,
        op_span: Span,
        op: &str,
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        if matches!(
            self.peek(),
            Tok::Newline | Tok::Eof | Tok::RParen | Tok::Comma | Tok::RBracket
        ) {
            return Err(syntax(op_span, format!("expected operand after `{op}`")));
        }
        next(self)
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.at_word("or") {
            let span = self.bump().span;
            let rhs = self.operand_after(span, "or", Self::and_expr)?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.cmp_expr()?;
        while self.at_word("and") {
            let span = self.bump().span;
            let rhs = self.operand_after(span, "and", Self::cmp_expr)?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[
                (Tok::Lt, BinaryOp::Lt),
                (Tok::Le, BinaryOp::Le),
                (Tok::Gt, BinaryOp::Gt),
                (Tok::Ge, BinaryOp::Ge),
                (Tok::EqEq, BinaryOp::Eq),
                (Tok::Ne, BinaryOp::Ne),
            ],
            Self::add_expr,
        )
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[(Tok::Plus, BinaryOp::Add), (Tok::Minus, BinaryOp::Sub)],
            Self::mul_expr,
        )
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[(Tok::Star, BinaryOp::Mul), (Tok::Slash, BinaryOp::Div)],
            Self::unary_expr,
        )
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if self.at(&Tok::Minus) {
            let span = self.bump().span;
            // a bare numeral becomes a negative literal; `-2^2` stays -(2^2)
            if let Tok::Number(v) = *self.peek() {
                if *self.peek_at(1) != Tok::Caret {
                    self.bump();
                    return Ok(Expr::Literal(-v));
                }
            }
            let e = self.operand_after(span, "-", Self::unary_expr)?;
            return Ok(Expr::negate(e));
        }
        if self.at_word("not") {
            let span = self.bump().span;
            let e = self.operand_after(span, "not", Self::unary_expr)?;
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(e)));
        }
        self.power_expr()
    }

    fn power_expr(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if self.at(&Tok::Caret) {
            let span = self.bump().span;
            let exp = self.operand_after(span, "^", Self::unary_expr)?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Literal(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expression()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) if *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                self.call(&name, span)
            }
            Tok::Ident(name) if matches!(name.as_str(), "and" | "or" | "not" | "lookup") => Err(
                syntax(span, format!("expected operand, found keyword `{name}`")),
            ),
            Tok::Ident(_) => Ok(Expr::Ref(self.reference("identifier")?)),
            other => Err(syntax(
                span,
                format!("expected operand, found {}", other.describe()),
            )),
        }
    }

    fn call(&mut self, name: &str, span: Span) -> PResult<Expr> {
        if name == "lookup" {
            let table = self.reference("lookup table id")?;
            self.expect(&Tok::Comma)?;
            let arg = self.expression()?;
            if self.at(&Tok::Comma) {
                return Err(
                    Diagnostic::new(codes::E_ARITY, "lookup takes 2 arguments (table, x)")
                        .at_span(span.to(self.span())),
                );
            }
            let close = self.expect(&Tok::RParen)?;
            let _ = close;
            return Ok(Expr::Lookup {
                table,
                arg: Box::new(arg),
            });
        }
        let Some(builtin) = Builtin::from_name(name) else {
            return Err(syntax(span, format!("unknown function `{name}`")));
        };
        let mut args = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                args.push(self.expression()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let close = self.expect(&Tok::RParen)?;
        if args.len() != builtin.arity() {
            return Err(Diagnostic::new(
                codes::E_ARITY,
                format!(
                    "{} takes {} argument{}, found {}",
                    builtin.name(),
                    builtin.arity(),
                    if builtin.arity() == 1 { "" } else { "s" },
                    args.len()
                ),
            )
            .at_span(span.to(close)));
        }
        Ok(Expr::Call(builtin, args))
    }

    // ---- statements ----

    pub fn model(&mut self) -> Option<Model> {
        let mut model = Model::new("", TimeSpec::default());
        let mut header_seen = false;
        loop {
            self.skip_newlines();
            if self.at(&Tok::Eof) {
                break;
            }
            if self.diags.len() >= MAX_SYNTAX_ERRORS {
                break;
            }
            let start = self.span();
            let result = match self.peek().clone() {
                Tok::Ident(kw) => {
                    self.bump();
                    match kw.as_str() {
                        "model" => {
                            if header_seen {
                                Err(syntax(start, "duplicate `model` header"))
                            } else {
                                header_seen = true;
                                self.spans.header = Some(start);
                                self.header(&mut model)
                            }
                        }
                        "notes" => self.string("notes").and_then(|s| {
                            if !model.notes.is_empty() {
                                model.notes.push('\n');
                            }
                            model.notes.push_str(&s);
                            self.end_of_statement()
                        }),
                        "const" => self.variable(&mut model, VariableKind::Constant, start),
                        "aux" => self.variable(&mut model, VariableKind::Auxiliary, start),
                        "data" => self.data(&mut model, start),
                        "stock" => self.stock(&mut model, start),
                        "link" => self.link(&mut model, start),
                        "lookup" => self.lookup(&mut model, start),
                        "indicator" => self.indicator(&mut model),
                        "scenario" => self.scenario(&mut model),
                        other => Err(syntax(start, format!("unknown statement `{other}`"))),
                    }
                }
                other => Err(syntax(
                    start,
                    format!("expected a statement keyword, found {}", other.describe()),
                )),
            };
            self.current_element = None;
            if let Err(d) = result {
                self.diags.push(d);
                self.skip_line();
            }
        }
        if !header_seen && self.diags.is_empty() {
            self.diags.push(syntax(
                Span::point(1, 1),
                "missing `model \"<id>\" { time .. }` header",
            ));
        }
        Some(model)
    }

    fn header(&mut self, model: &mut Model) -> PResult<()> {
        model.id = self.string("model id")?;
        if self.eat_word("name") {
            model.name = self.string("model name")?;
        }
        self.expect(&Tok::LBrace)?;
        self.skip_newlines();
        self.expect_word("time")?;
        let t_start = self.number()?;
        self.expect(&Tok::DotDot)?;
        let t_stop = self.number()?;
        self.skip_newlines();
        self.expect_word("dt")?;
        let dt = self.number()?;
        self.skip_newlines();
        let mut unit = String::new();
        if self.eat_word("unit") {
            unit = self.string("time unit")?;
        }
        self.skip_newlines();
        self.expect(&Tok::RBrace)?;
        model.time_spec = TimeSpec::new(t_start, t_stop, dt, unit);
        self.end_of_statement()
    }

    fn declare(&mut self, what: &str, start: Span) -> PResult<String> {
        let (id, _) = self.ident(what)?;
        self.spans.declarations.push((id.clone(), start));
        self.current_element = Some(id.clone());
        Ok(id)
    }

    fn source_clause(&mut self) -> PResult<QuantificationSource> {
        let (tag, span) = self.tag("source tag")?;
        let tag = SourceTag::parse(&tag).ok_or_else(|| {
            syntax(
                span,
                format!("unknown source `{tag}` (literature, measured-data, dedicated-study, expert-hypothesis)"),
            )
        })?;
        let citation = if matches!(self.peek(), Tok::Str(_)) {
            self.string("citation")?
        } else {
            String::new()
        };
        Ok(QuantificationSource { tag, citation })
    }

    /// Trailing metadata shared by variables; returns false on an unknown word.
    fn common_clause(&mut self, var: &mut Variable) -> PResult<bool> {
        if self.eat_word("name") {
            var.name = self.string("name")?;
        } else if self.eat_word("unit") {
            var.unit = self.string("unit")?;
        } else if self.eat_word("source") {
            var.provenance = Some(self.source_clause()?);
        } else if self.eat_word("doc") {
            var.doc = self.string("doc")?;
        } else if var.kind == VariableKind::Constant && self.eat_word("slider") {
            let min = self.number()?;
            self.expect(&Tok::DotDot)?;
            let max = self.number()?;
            var.slider = Some(SliderRange { min, max });
        } else {
            return Ok(false);
        }
        Ok(true)
    }

    fn clauses_until_eol(
        &mut self,
        mut clause: impl FnMut(&mut Self) -> PResult<bool>,
    ) -> PResult<()> {
        loop {
            if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                return self.end_of_statement();
            }
            if !clause(self)? {
                return Err(syntax(
                    self.span(),
                    format!("unexpected {}", self.peek().describe()),
                ));
            }
        }
    }

    fn variable(&mut self, model: &mut Model, kind: VariableKind, start: Span) -> PResult<()> {
        let id = self.declare("variable id", start)?;
        let mut var = Variable {
            expression: None,
            kind,
            ..Variable::exogenous(id)
        };
        if self.eat(&Tok::Eq) {
            var.expression = Some(self.expression()?);
        } else if kind == VariableKind::Constant {
            return Err(syntax(self.span(), "expected `=` and a value for constant"));
        }
        self.clauses_until_eol(|p| p.common_clause(&mut var))?;
        model.variables.push(var);
        Ok(())
    }

    fn points(&mut self) -> PResult<Vec<(f64, f64)>> {
        self.expect(&Tok::LBracket)?;
        let mut pts = Vec::new();
        if !self.at(&Tok::RBracket) {
            loop {
                self.expect(&Tok::LParen)?;
                let x = self.number()?;
                self.expect(&Tok::Comma)?;
                let y = self.number()?;
                self.expect(&Tok::RParen)?;
                pts.push((x, y));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RBracket)?;
        Ok(pts)
    }

    fn data(&mut self, model: &mut Model, start: Span) -> PResult<()> {
        let id = self.declare("variable id", start)?;
        let source = if self.eat_word("from") {
            let path = self.string("file path")?;
            self.expect_word("column")?;
            let column = self.string("column name")?;
            let time_column = if self.eat_word("time") {
                self.string("time column")?
            } else {
                "t".to_string()
            };
            DataSource::File {
                path,
                time_column,
                column,
            }
        } else if self.eat_word("points") {
            DataSource::Inline {
                points: self.points()?,
            }
        } else {
            return Err(syntax(
                self.span(),
                "expected `from \"<file>\"` or `points [...]`",
            ));
        };
        let mut binding = DataBinding {
            source,
            interp: Interpolation::Linear,
            extrapolation: Extrapolation::Error,
        };
        let mut var = Variable::exogenous(id.clone());
        self.clauses_until_eol(|p| {
            if p.eat_word("interp") {
                let (w, span) = p.ident("interpolation")?;
                binding.interp = match w.as_str() {
                    "linear" => Interpolation::Linear,
                    "hold" => Interpolation::Hold,
                    _ => {
                        return Err(syntax(
                            span,
                            format!("unknown interpolation `{w}` (linear, hold)"),
                        ))
                    }
                };
                Ok(true)
            } else if p.eat_word("extrapolate") {
                let (w, span) = p.ident("extrapolation")?;
                binding.extrapolation = match w.as_str() {
                    "error" => Extrapolation::Error,
                    "hold_ends" => Extrapolation::HoldEnds,
                    _ => {
                        return Err(syntax(
                            span,
                            format!("unknown extrapolation `{w}` (error, hold_ends)"),
                        ))
                    }
                };
                Ok(true)
            } else {
                p.common_clause(&mut var)
            }
        })?;
        model.variables.push(var);
        model.data_bindings.insert(id, binding);
        Ok(())
    }

    fn flow_list(&mut self, out: &mut Vec<String>) -> PResult<()> {
        loop {
            out.push(self.reference("flow variable id")?);
            if !self.eat(&Tok::Comma) {
                return Ok(());
            }
        }
    }

    fn stock(&mut self, model: &mut Model, start: Span) -> PResult<()> {
        let id = self.declare("stock id", start)?;
        self.expect_word("init")?;
        let initial = self.expression()?;
        let mut stock = Stock::new(id, initial);
        // stock metadata reuses the variable clause parser
        let mut meta = Variable::exogenous("");
        self.clauses_until_eol(|p| {
            if p.eat_word("inflow") {
                p.flow_list(&mut stock.inflows)?;
            } else if p.eat_word("outflow") {
                p.flow_list(&mut stock.outflows)?;
            } else if p.eat_word("non_negative") {
                stock.non_negative = true;
            } else {
                return p.common_clause(&mut meta);
            }
            Ok(true)
        })?;
        stock.name = meta.name;
        stock.unit = meta.unit;
        stock.provenance = meta.provenance;
        stock.doc = meta.doc;
        model.stocks.push(stock);
        Ok(())
    }

    fn link(&mut self, model: &mut Model, start: Span) -> PResult<()> {
        let (from, _) = self.ident("link source")?;
        self.expect(&Tok::Arrow)?;
        let (to, _) = self.ident("link target")?;
        let mut link = InfluenceLink::new(from.clone(), to.clone(), Polarity::Unspecified);
        self.clauses_until_eol(|p| {
            if p.eat_word("polarity") {
                link.polarity = match p.peek() {
                    Tok::Plus => Polarity::Positive,
                    Tok::Minus => Polarity::Negative,
                    Tok::Question => Polarity::Unspecified,
                    other => {
                        return Err(syntax(p.span(), format!("expected `+`, `-` or `?`, found {}", other.describe())))
                    }
                };
                p.bump();
            } else if p.eat_word("delayed") {
                link.delayed = true;
            } else if p.eat_word("order") {
                let (w, span) = p.tag("effect order")?;
                link.effect_order = EffectOrder::parse(&w).ok_or_else(|| {
                    syntax(
                        span,
                        format!("unknown effect order `{w}` (first-order, direct-rebound, indirect-rebound, higher-order, untagged)"),
                    )
                })?;
            } else {
                return Ok(false);
            }
            Ok(true)
        })?;
        self.spans
            .links
            .push((from, to, start.to(self.prev_span())));
        model.links.push(link);
        Ok(())
    }

    fn lookup(&mut self, model: &mut Model, start: Span) -> PResult<()> {
        let id = self.declare("lookup id", start)?;
        self.expect(&Tok::Eq)?;
        let points = self.points()?;
        let mut table = LookupTable::new(id, points);
        self.clauses_until_eol(|p| {
            if p.eat_word("interp") {
                let (w, span) = p.ident("interpolation")?;
                if w != "linear" {
                    return Err(syntax(span, "lookup tables only support `interp linear`"));
                }
            } else if p.eat_word("doc") {
                table.doc = p.string("doc")?;
            } else {
                return Ok(false);
            }
            Ok(true)
        })?;
        model.lookups.push(table);
        Ok(())
    }

    fn indicator(&mut self, model: &mut Model) -> PResult<()> {
        let (name, _) = self.ident("indicator name")?;
        self.expect(&Tok::Eq)?;
        let (kind_word, kind_span) = self.ident("indicator kind")?;
        self.expect(&Tok::LParen)?;
        let (target, _) = self.ident("indicator target")?;
        let kind = match kind_word.as_str() {
            "final_value" => IndicatorKind::FinalValue,
            "cumulative" => IndicatorKind::Cumulative,
            "peak" => IndicatorKind::Peak,
            "average" => IndicatorKind::Average,
            "time_to_threshold" => {
                self.expect(&Tok::Comma)?;
                let threshold = self.number()?;
                self.expect(&Tok::Comma)?;
                let (dir, span) = self.ident("direction")?;
                let direction = match dir.as_str() {
                    "rising" => Direction::Rising,
                    "falling" => Direction::Falling,
                    _ => return Err(syntax(span, "expected `rising` or `falling`")),
                };
                IndicatorKind::TimeToThreshold { threshold, direction }
            }
            other => {
                return Err(syntax(
                    kind_span,
                    format!("unknown indicator kind `{other}` (final_value, cumulative, peak, average, time_to_threshold)"),
                ))
            }
        };
        self.expect(&Tok::RParen)?;
        model.indicators.push(Indicator { name, target, kind });
        self.end_of_statement()
    }

    fn scenario(&mut self, model: &mut Model) -> PResult<()> {
        let (name, _) = self.ident("scenario name")?;
        let description = if matches!(self.peek(), Tok::Str(_)) {
            self.string("description")?
        } else {
            String::new()
        };
        self.expect(&Tok::LBrace)?;
        let mut scenario = Scenario {
            name,
            description,
            overrides: BTreeMap::new(),
            interventions: Vec::new(),
        };
        loop {
            self.skip_newlines();
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.at(&Tok::Eof) {
                return Err(syntax(
                    self.span(),
                    "unterminated scenario block, expected `}`",
                ));
            }
            if let Err(d) = self.scenario_item(&mut scenario) {
                self.diags.push(d);
                self.skip_line();
            }
        }
        model.scenarios.push(scenario);
        self.end_of_statement()
    }

    fn scenario_item(&mut self, scenario: &mut Scenario) -> PResult<()> {
        let (word, span) = self.ident("`override`, `set` or `scale`")?;
        match word.as_str() {
            "override" => {
                let (target, _) = self.ident("constant id")?;
                self.expect(&Tok::Eq)?;
                let v = self.number()?;
                scenario.overrides.insert(target, v);
            }
            "set" => {
                let (target, _) = self.ident("target id")?;
                self.expect_word("at")?;
                let at_time = self.number()?;
                self.expect(&Tok::Eq)?;
                let value = self.number()?;
                scenario.interventions.push(Intervention {
                    target,
                    at_time,
                    action: Action::Set { value },
                });
            }
            "scale" => {
                let (target, _) = self.ident("target id")?;
                self.expect_word("at")?;
                let at_time = self.number()?;
                self.expect_word("by")?;
                let factor = self.number()?;
                scenario.interventions.push(Intervention {
                    target,
                    at_time,
                    action: Action::Scale { factor },
                });
            }
            other => return Err(syntax(span, format!("unknown scenario item `{other}`"))),
        }
        if self.at(&Tok::RBrace) {
            return Ok(());
        }
        self.end_of_statement()
    }
}
