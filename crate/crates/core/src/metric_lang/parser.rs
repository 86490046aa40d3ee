//! Recursive-descent parser for metric expressions.
//!
//! ```text
//! program := ('let' ident '=' expr ';')* expr
//! expr    := term (('+'|'-') term)*
//! term    := factor (('*'|'/') factor)*
//! factor  := atom ('^' rational)? | '-' factor
//! atom    := number | ident | call | '(' expr ')'
//! call    := 'dot' '(' vexpr ',' vexpr ')' | 'norm2' '(' vexpr ')' | 'sqrt' '(' expr ')'
//! vexpr   := 'x' | 'y' | ident
//! rational:= integer | '(' '-'? integer '/' integer ')'
//! ```

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use super::ast::{DeclaredForm, Expr, MetricExpr, ParamValue, Params, Rational, VecOperand};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    TypeMismatch(String),
    Unbound(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::TypeMismatch(m) => write!(f, "type mismatch: {m}"),
            ParseErrorKind::Unbound(name) => write!(f, "unbound identifier `{name}`"),
        }
    }
}

/// Parse failure with a 1-based line/column position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Semi,
    Equals,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(_, raw) => write!(f, "number `{raw}`"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Equals => f.write_str("`=`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            // comment to end of line
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            ';' => Some(Tok::Semi),
            '=' => Some(Tok::Equals),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line: tl, col: tc });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let raw: String = chars[start..i].iter().collect();
            let value: f64 = raw.parse().map_err(|_| ParseError {
                line: tl,
                col: tc,
                kind: ParseErrorKind::Syntax(format!("malformed number `{raw}`")),
            })?;
            col += i - start;
            out.push(Token {
                tok: Tok::Num(value, raw),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        return Err(ParseError {
            line: tl,
            col: tc,
            kind: ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const RESERVED: [&str; 6] = ["x", "y", "dot", "norm2", "sqrt", "let"];

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    params: &'a Params,
    locals: HashSet<String>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, t: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: t.line,
            col: t.col,
            kind,
        }
    }

    fn expect(&mut self, want: Tok, context: &str) -> PResult<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.err_at(
                &t,
                ParseErrorKind::Syntax(format!("expected {want} {context}, found {}", t.tok)),
            ))
        }
    }

    fn program(&mut self) -> PResult<(Vec<(String, Expr)>, Expr)> {
        let mut locals = Vec::new();
        while matches!(&self.peek().tok, Tok::Ident(s) if s == "let") {
            self.next();
            let name_tok = self.next();
            let name = match &name_tok.tok {
                Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => s.clone(),
                other => {
                    return Err(self.err_at(
                        &name_tok,
                        ParseErrorKind::Syntax(format!("expected a binding name, found {other}")),
                    ))
                }
            };
            if self.params.contains_key(&name) || self.locals.contains(&name) {
                return Err(self.err_at(
                    &name_tok,
                    ParseErrorKind::Syntax(format!("`{name}` is already bound")),
                ));
            }
            self.expect(Tok::Equals, "after binding name")?;
            let e = self.expr()?;
            self.expect(Tok::Semi, "after binding")?;
            self.locals.insert(name.clone());
            locals.push((name, e));
        }
        let root = self.expr()?;
        let t = self.peek().clone();
        if t.tok != Tok::Eof {
            return Err(self.err_at(
                &t,
                ParseErrorKind::Syntax(format!("unexpected {} after expression", t.tok)),
            ));
        }
        Ok((locals, root))
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> PResult<Expr> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.next();
            let r = self.rational()?;
            return Ok(Expr::pow(base, r));
        }
        Ok(base)
    }

    fn integer(&mut self) -> PResult<i64> {
        let t = self.next();
        match &t.tok {
            Tok::Num(_, raw) if raw.chars().all(|c| c.is_ascii_digit()) => {
                raw.parse().map_err(|_| {
                    self.err_at(&t, ParseErrorKind::Syntax(format!("integer `{raw}` too large")))
                })
            }
            other => Err(self.err_at(
                &t,
                ParseErrorKind::Syntax(format!("expected an integer exponent, found {other}")),
            )),
        }
    }

    fn rational(&mut self) -> PResult<Rational> {
        let start = self.peek().clone();
        let (p, q) = if start.tok == Tok::LParen {
            self.next();
            let negative = if self.peek().tok == Tok::Minus {
                self.next();
                true
            } else {
                false
            };
            let p = self.integer()?;
            self.expect(Tok::Slash, "in rational exponent")?;
            let q = self.integer()?;
            self.expect(Tok::RParen, "to close rational exponent")?;
            (if negative { -p } else { p }, q)
        } else {
            (self.integer()?, 1)
        };
        Rational::new(p, q).ok_or_else(|| {
            self.err_at(&start, ParseErrorKind::Syntax("zero denominator in exponent".into()))
        })
    }

    fn atom(&mut self) -> PResult<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v, _) => Ok(Expr::Num(*v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "to close `(`")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "dot" => {
                    self.expect(Tok::LParen, "after `dot`")?;
                    let a = self.vexpr()?;
                    self.expect(Tok::Comma, "between `dot` arguments")?;
                    let b = self.vexpr()?;
                    self.expect(Tok::RParen, "to close `dot(`")?;
                    Ok(Expr::Dot(a, b))
                }
                "norm2" => {
                    self.expect(Tok::LParen, "after `norm2`")?;
                    let a = self.vexpr()?;
                    self.expect(Tok::RParen, "to close `norm2(`")?;
                    Ok(Expr::Norm2(a))
                }
                "sqrt" => {
                    self.expect(Tok::LParen, "after `sqrt`")?;
                    let e = self.expr()?;
                    self.expect(Tok::RParen, "to close `sqrt(`")?;
                    Ok(Expr::Sqrt(Box::new(e)))
                }
                "x" | "y" => Err(self.err_at(
                    &t,
                    ParseErrorKind::TypeMismatch(format!(
                        "vector `{name}` used as a scalar; wrap it in dot() or norm2()"
                    )),
                )),
                "let" => Err(self.err_at(
                    &t,
                    ParseErrorKind::Syntax("`let` only allowed before the expression".into()),
                )),
                _ => {
                    if self.locals.contains(name) {
                        return Ok(Expr::Local(name.clone()));
                    }
                    match self.params.get(name) {
                        Some(ParamValue::Scalar(_)) => Ok(Expr::Param(name.clone())),
                        Some(ParamValue::Vector(_)) => Err(self.err_at(
                            &t,
                            ParseErrorKind::TypeMismatch(format!(
                                "vector parameter `{name}` used as a scalar"
                            )),
                        )),
                        None => Err(self.err_at(&t, ParseErrorKind::Unbound(name.clone()))),
                    }
                }
            },
            other => Err(self.err_at(
                &t,
                ParseErrorKind::Syntax(format!("expected an operand, found {other}")),
            )),
        }
    }

    fn vexpr(&mut self) -> PResult<VecOperand> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(name) if name == "x" => Ok(VecOperand::X),
            Tok::Ident(name) if name == "y" => Ok(VecOperand::Y),
            Tok::Ident(name) => match self.params.get(name) {
                Some(ParamValue::Vector(_)) => Ok(VecOperand::Param(name.clone())),
                Some(ParamValue::Scalar(_)) => Err(self.err_at(
                    &t,
                    ParseErrorKind::TypeMismatch(format!(
                        "scalar parameter `{name}` used where a vector is required"
                    )),
                )),
                None if self.locals.contains(name) => Err(self.err_at(
                    &t,
                    ParseErrorKind::TypeMismatch(format!(
                        "binding `{name}` is scalar; a vector is required"
                    )),
                )),
                None => Err(self.err_at(&t, ParseErrorKind::Unbound(name.clone()))),
            },
            other => Err(self.err_at(
                &t,
                ParseErrorKind::Syntax(format!("expected a vector (x, y or parameter), found {other}")),
            )),
        }
    }
}

/// Parses `text` against the declared parameters.
pub fn parse(text: &str, form: DeclaredForm, params: &Params) -> Result<MetricExpr, ParseError> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
        params,
        locals: HashSet::new(),
    };
    let (locals, root) = p.program()?;
    Ok(MetricExpr {
        locals,
        root,
        form,
        params: params.clone(),
    })
}
