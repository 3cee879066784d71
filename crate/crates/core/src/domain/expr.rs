//! Boolean constraint expressions over scenario attributes.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := or ( ("=>" | "->" | "implies") expr )?      right-associative
//! or      := and ( ("or" | "||") and )*
//! and     := unary ( ("and" | "&&") unary )*
//! unary   := ("not" | "!") unary | primary
//! primary := "(" expr ")" | "true" | "false"
//!          | ATTR op literal
//!          | ATTR "in" "{" literal ("," literal)* "}"
//! op      := "=" | "==" | "!=" | "<" | "<=" | ">" | ">="
//! literal := SYMBOL | INTEGER | "quoted"
//! ```
//!
//! Attribute names may contain dots (`Road.type`). Ordering comparisons on
//! enumerations use declaration order.

use std::fmt;

use thiserror::Error;

use super::{AttributeDef, AttributeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn apply(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// A resolved expression. Attribute references are indices into the owning
/// model's attribute list; values are codes (enumeration ordinal or the
/// integer itself).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(bool),
    Cmp { attr: usize, op: CmpOp, code: i64 },
    In { attr: usize, codes: Vec<i64> },
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("value `{value}` is not valid for attribute `{attr}`")]
    BadValue { attr: String, value: String },
}

impl Expr {
    pub fn parse(src: &str, attrs: &[AttributeDef]) -> Result<Expr, ExprError> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, attrs, end: src.len() };
        let e = p.implication()?;
        if p.pos != p.tokens.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, codes: &[i64]) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Cmp { attr, op, code } => op.apply(codes[*attr], *code),
            Expr::In { attr, codes: set } => set.contains(&codes[*attr]),
            Expr::Not(e) => !e.eval(codes),
            Expr::And(es) => es.iter().all(|e| e.eval(codes)),
            Expr::Or(es) => es.iter().any(|e| e.eval(codes)),
            Expr::Implies(a, b) => !a.eval(codes) || b.eval(codes),
        }
    }

    /// Three-valued (Kleene) evaluation over a partial assignment. `None`
    /// means the value depends on unassigned attributes.
    pub fn eval_partial(&self, codes: &[Option<i64>]) -> Option<bool> {
        match self {
            Expr::Const(b) => Some(*b),
            Expr::Cmp { attr, op, code } => codes[*attr].map(|v| op.apply(v, *code)),
            Expr::In { attr, codes: set } => codes[*attr].map(|v| set.contains(&v)),
            Expr::Not(e) => e.eval_partial(codes).map(|b| !b),
            Expr::And(es) => {
                let mut unknown = false;
                for e in es {
                    match e.eval_partial(codes) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        Some(true) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            Expr::Or(es) => {
                let mut unknown = false;
                for e in es {
                    match e.eval_partial(codes) {
                        Some(true) => return Some(true),
                        None => unknown = true,
                        Some(false) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(false)
                }
            }
            Expr::Implies(a, b) => match (a.eval_partial(codes), b.eval_partial(codes)) {
                (Some(false), _) | (_, Some(true)) => Some(true),
                (Some(true), Some(false)) => Some(false),
                _ => None,
            },
        }
    }

    /// Indices of every attribute the expression mentions.
    pub fn attributes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_attrs(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_attrs(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Cmp { attr, .. } | Expr::In { attr, .. } => out.push(*attr),
            Expr::Not(e) => e.collect_attrs(out),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.collect_attrs(out)),
            Expr::Implies(a, b) => {
                a.collect_attrs(out);
                b.collect_attrs(out);
            }
        }
    }

    /// Renders the expression with attribute names and symbolic values.
    pub fn display<'a>(&'a self, attrs: &'a [AttributeDef]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, attrs }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    attrs: &'a [AttributeDef],
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.attrs, false)
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, attr: &AttributeDef, code: i64) -> fmt::Result {
    match &attr.kind {
        AttributeKind::Enumeration { values } => match values.get(code as usize) {
            Some(v) if is_plain_symbol(v) => write!(f, "{v}"),
            Some(v) => write!(f, "\"{v}\""),
            None => write!(f, "#{code}"),
        },
        AttributeKind::Integer { .. } => write!(f, "{code}"),
    }
}

fn is_plain_symbol(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit() || c == '-')
        && s.chars().all(is_ident_char)
        && !matches!(
            s.to_ascii_lowercase().as_str(),
            "and" | "or" | "not" | "in" | "implies" | "true" | "false"
        )
}

fn write_expr(
    f: &mut fmt::Formatter<'_>,
    e: &Expr,
    attrs: &[AttributeDef],
    nested: bool,
) -> fmt::Result {
    let open = |f: &mut fmt::Formatter<'_>| if nested { write!(f, "(") } else { Ok(()) };
    let close = |f: &mut fmt::Formatter<'_>| if nested { write!(f, ")") } else { Ok(()) };
    match e {
        Expr::Const(b) => write!(f, "{b}"),
        Expr::Cmp { attr, op, code } => {
            write!(f, "{} {} ", attrs[*attr].name, op.symbol())?;
            write_literal(f, &attrs[*attr], *code)
        }
        Expr::In { attr, codes } => {
            write!(f, "{} in {{", attrs[*attr].name)?;
            for (i, c) in codes.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_literal(f, &attrs[*attr], *c)?;
            }
            write!(f, "}}")
        }
        Expr::Not(inner) => {
            write!(f, "not ")?;
            write_expr(f, inner, attrs, true)
        }
        Expr::And(es) | Expr::Or(es) => {
            if es.is_empty() {
                return write!(f, "{}", matches!(e, Expr::And(_)));
            }
            let sep = if matches!(e, Expr::And(_)) { " and " } else { " or " };
            open(f)?;
            for (i, sub) in es.iter().enumerate() {
                if i > 0 {
                    write!(f, "{sep}")?;
                }
                write_expr(f, sub, attrs, true)?;
            }
            close(f)
        }
        Expr::Implies(a, b) => {
            open(f)?;
            write_expr(f, a, attrs, true)?;
            write!(f, " => ")?;
            write_expr(f, b, attrs, true)?;
            close(f)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Op(CmpOp),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    And,
    Or,
    Not,
    In,
    Implies,
    True,
    False,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.' || c == '-'
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |pos: usize, msg: &str| ExprError::Syntax { pos, msg: msg.to_string() };
    while i < bytes.len() {
        let c = src[i..].chars().next().unwrap();
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let two = src.get(i..i + 2).unwrap_or("");
        let tok = match two {
            "=>" | "->" => Some(Tok::Implies),
            "&&" => Some(Tok::And),
            "||" => Some(Tok::Or),
            "==" => Some(Tok::Op(CmpOp::Eq)),
            "!=" => Some(Tok::Op(CmpOp::Ne)),
            "<=" => Some(Tok::Op(CmpOp::Le)),
            ">=" => Some(Tok::Op(CmpOp::Ge)),
            _ => None,
        };
        if let Some(t) = tok {
            out.push((start, t));
            i += 2;
            continue;
        }
        let single = match c {
            '=' => Some(Tok::Op(CmpOp::Eq)),
            '<' => Some(Tok::Op(CmpOp::Lt)),
            '>' => Some(Tok::Op(CmpOp::Gt)),
            '!' => Some(Tok::Not),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            out.push((start, t));
            i += 1;
            continue;
        }
        if c == '"' {
            let rest = &src[i + 1..];
            let end = rest.find('"').ok_or_else(|| syntax(start, "unterminated string"))?;
            out.push((start, Tok::Str(rest[..end].to_string())));
            i += end + 2;
            continue;
        }
        let numeric = c.is_ascii_digit()
            || (c == '-' && src[i + 1..].starts_with(|d: char| d.is_ascii_digit()));
        if numeric {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let n: i64 = src[i..j].parse().map_err(|_| syntax(start, "integer out of range"))?;
            out.push((start, Tok::Int(n)));
            i = j;
            continue;
        }
        if is_ident_char(c) && c != '-' {
            let mut j = i;
            while let Some(ch) = src[j..].chars().next() {
                if !is_ident_char(ch) || (ch == '-' && src[j + 1..].starts_with('>')) {
                    break;
                }
                j += ch.len_utf8();
            }
            let word = &src[i..j];
            let t = match word.to_ascii_lowercase().as_str() {
                "and" => Tok::And,
                "or" => Tok::Or,
                "not" => Tok::Not,
                "in" => Tok::In,
                "implies" => Tok::Implies,
                "true" if !word.starts_with('T') => Tok::True,
                "false" if !word.starts_with('F') => Tok::False,
                _ => Tok::Ident(word.to_string()),
            };
            out.push((start, t));
            i = j;
            continue;
        }
        return Err(syntax(start, &format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    attrs: &'a [AttributeDef],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn err(&self, msg: &str) -> ExprError {
        let pos = self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p);
        ExprError::Syntax { pos, msg: msg.to_string() }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implication(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implication()?;
            return Ok(Expr::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Expr, ExprError> {
        let mut items = vec![self.conjunction()?];
        while self.eat(&Tok::Or) {
            items.push(self.conjunction()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Expr::Or(items) })
    }

    fn conjunction(&mut self) -> Result<Expr, ExprError> {
        let mut items = vec![self.unary()?];
        while self.eat(&Tok::And) {
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Expr::And(items) })
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&Tok::Not) {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.implication()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(Tok::True) => {
                self.pos += 1;
                Ok(Expr::Const(true))
            }
            Some(Tok::False) => {
                self.pos += 1;
                Ok(Expr::Const(false))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let attr = self
                    .attrs
                    .iter()
                    .position(|a| a.name == name)
                    .ok_or_else(|| ExprError::UnknownAttribute(name.clone()))?;
                match self.peek().cloned() {
                    Some(Tok::Op(op)) => {
                        self.pos += 1;
                        let code = self.literal(attr)?;
                        Ok(Expr::Cmp { attr, op, code })
                    }
                    Some(Tok::In) => {
                        self.pos += 1;
                        if !self.eat(&Tok::LBrace) {
                            return Err(self.err("expected `{`"));
                        }
                        let mut codes = vec![self.literal(attr)?];
                        while self.eat(&Tok::Comma) {
                            codes.push(self.literal(attr)?);
                        }
                        if !self.eat(&Tok::RBrace) {
                            return Err(self.err("expected `}`"));
                        }
                        Ok(Expr::In { attr, codes })
                    }
                    _ => Err(self.err("expected comparison operator or `in`")),
                }
            }
            _ => Err(self.err("expected expression")),
        }
    }

    fn literal(&mut self, attr: usize) -> Result<i64, ExprError> {
        let def = &self.attrs[attr];
        let tok = self.peek().cloned();
        let bad = |value: String| ExprError::BadValue { attr: def.name.clone(), value };
        let code = match (&def.kind, tok) {
            (AttributeKind::Enumeration { values }, Some(Tok::Ident(s) | Tok::Str(s))) => {
                values.iter().position(|v| *v == s).ok_or_else(|| bad(s))? as i64
            }
            (AttributeKind::Enumeration { values }, Some(Tok::True | Tok::False)) => {
                let s = if self.peek() == Some(&Tok::True) { "true" } else { "false" };
                values.iter().position(|v| v == s).ok_or_else(|| bad(s.into()))? as i64
            }
            (AttributeKind::Enumeration { .. }, Some(Tok::Int(n))) => return Err(bad(n.to_string())),
            (AttributeKind::Integer { .. }, Some(Tok::Int(n))) => n,
            (AttributeKind::Integer { .. }, Some(Tok::Ident(s) | Tok::Str(s))) => return Err(bad(s)),
            _ => return Err(self.err("expected a value")),
        };
        self.pos += 1;
        Ok(code)
    }
}
