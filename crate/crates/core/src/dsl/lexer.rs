use crate::diagnostics::{self as codes, Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Arrow,
    DotDot,
    Question,
    Newline,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(_) => "string".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Tok::Eq => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Arrow => "->",
            Tok::DotDot => "..",
            Tok::Question => "?",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Tokenize model text. Newlines inside `(...)` and `[...]` are dropped so
/// long expressions and point lists can wrap.
pub fn lex(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let mut depth: usize = 0;

    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            let len: usize = $len;
            tokens.push(Token {
                tok: $tok,
                span: Span {
                    line,
                    column: col,
                    end_line: line,
                    end_column: col + len,
                },
            });
            i += len;
            col += len;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                if depth == 0 {
                    tokens.push(Token {
                        tok: Tok::Newline,
                        span: Span::point(line, col),
                    });
                }
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            '"' => {
                let start = Span::point(line, col);
                let mut s = String::new();
                let mut j = i + 1;
                let mut ccol = col + 1;
                let mut closed = false;
                while j < chars.len() {
                    match chars[j] {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\n' => break,
                        '\\' => {
                            let esc = chars.get(j + 1).copied();
                            match esc {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                _ => diags.push(
                                    Diagnostic::new(codes::E_SYNTAX, "invalid escape in string")
                                        .at_span(Span::point(line, ccol)),
                                ),
                            }
                            j += 2;
                            ccol += 2;
                            continue;
                        }
                        ch => s.push(ch),
                    }
                    j += 1;
                    ccol += 1;
                }
                if !closed {
                    diags.push(
                        Diagnostic::new(codes::E_SYNTAX, "unterminated string").at_span(start),
                    );
                    tokens.push(Token {
                        tok: Tok::Str(s),
                        span: start.to(Span::point(line, ccol)),
                    });
                    col = ccol;
                    i = j;
                } else {
                    tokens.push(Token {
                        tok: Tok::Str(s),
                        span: start.to(Span::point(line, ccol + 1)),
                    });
                    col = ccol + 1;
                    i = j + 1;
                }
            }
            '0'..='9' => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let lexeme: String = chars[i..j].iter().collect();
                let value = lexeme.parse::<f64>().unwrap_or(f64::NAN);
                push!(Tok::Number(value), j - i);
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                push!(Tok::Ident(word), j - i);
            }
            '(' => {
                depth += 1;
                push!(Tok::LParen, 1)
            }
            ')' => {
                depth = depth.saturating_sub(1);
                push!(Tok::RParen, 1)
            }
            '[' => {
                depth += 1;
                push!(Tok::LBracket, 1)
            }
            ']' => {
                depth = depth.saturating_sub(1);
                push!(Tok::RBracket, 1)
            }
            '{' => push!(Tok::LBrace, 1),
            '}' => push!(Tok::RBrace, 1),
            ',' => push!(Tok::Comma, 1),
            '+' => push!(Tok::Plus, 1),
            '*' => push!(Tok::Star, 1),
            '/' => push!(Tok::Slash, 1),
            '^' => push!(Tok::Caret, 1),
            '?' => push!(Tok::Question, 1),
            '-' if next == Some('>') => push!(Tok::Arrow, 2),
            '-' => push!(Tok::Minus, 1),
            '.' if next == Some('.') => push!(Tok::DotDot, 2),
            '<' if next == Some('=') => push!(Tok::Le, 2),
            '<' => push!(Tok::Lt, 1),
            '>' if next == Some('=') => push!(Tok::Ge, 2),
            '>' => push!(Tok::Gt, 1),
            '=' if next == Some('=') => push!(Tok::EqEq, 2),
            '=' => push!(Tok::Eq, 1),
            '!' if next == Some('=') => push!(Tok::Ne, 2),
            other => {
                diags.push(
                    Diagnostic::new(codes::E_SYNTAX, format!("unexpected character `{other}`"))
                        .at_span(Span::point(line, col)),
                );
                i += 1;
                col += 1;
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span::point(line, col),
    });
    (tokens, diags)
}
