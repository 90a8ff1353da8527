//! Recursive-descent parser for linear expressions and constraints.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! sum     := ["+" | "-"] product (("+" | "-") product)*
//! product := unary ("*" unary | <implicit after a number literal> unary)*
//! unary   := ("+" | "-") unary | atom
//! atom    := number | ident | "(" sum ")"
//! ```
//!
//! A product is only accepted when at most one factor contains variables.
//! Identifiers resolve to decision variables first, then to bound parameters.

use std::collections::{BTreeMap, BTreeSet};

use super::{Constraint, LinExpr, Sense};
use crate::error::{ModelError, Result};

/// Names visible to the parser: decision variables and numeric parameters.
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    pub vars: &'a BTreeSet<String>,
    pub params: Option<&'a BTreeMap<String, f64>>,
}

impl<'a> Scope<'a> {
    pub fn vars(vars: &'a BTreeSet<String>) -> Self {
        Self { vars, params: None }
    }

    pub fn with_params(vars: &'a BTreeSet<String>, params: &'a BTreeMap<String, f64>) -> Self {
        Self {
            vars,
            params: Some(params),
        }
    }

    fn resolve(&self, name: &str) -> Option<LinExpr> {
        if self.vars.contains(name) {
            return Some(LinExpr::var(name));
        }
        self.params
            .and_then(|p| p.get(name))
            .map(|v| LinExpr::constant(*v))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Rel(Sense),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn syntax(position: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'/' => return Err(ModelError::Division { position: i }),
            b'^' => return Err(syntax(i, "exponentiation is not linear")),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, pos: start });
            i += 1;
            continue;
        }
        match c {
            b'<' | b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    let sense = if c == b'<' { Sense::Le } else { Sense::Ge };
                    out.push(Token {
                        tok: Tok::Rel(sense),
                        pos: start,
                    });
                    i += 2;
                } else {
                    return Err(syntax(
                        i,
                        format!(
                            "strict inequality `{}` is not supported; over integers write `lhs <= rhs - 1`",
                            c as char
                        ),
                    ));
                }
            }
            b'=' => {
                i += if bytes.get(i + 1) == Some(&b'=') { 2 } else { 1 };
                out.push(Token {
                    tok: Tok::Rel(Sense::Eq),
                    pos: start,
                });
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent only when digits follow, so `2e` stays `2 * e`
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let literal = &text[start..i];
                let value: f64 = literal
                    .parse()
                    .map_err(|_| syntax(start, format!("invalid number `{literal}`")))?;
                out.push(Token {
                    tok: Tok::Num(value),
                    pos: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    pos: start,
                });
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                match ch {
                    '≤' | '≥' => {
                        let sense = if ch == '≤' { Sense::Le } else { Sense::Ge };
                        out.push(Token {
                            tok: Tok::Rel(sense),
                            pos: start,
                        });
                        i += ch.len_utf8();
                    }
                    _ => return Err(syntax(i, format!("unexpected character `{ch}`"))),
                }
            }
        }
    }
    Ok(out)
}

struct Parser<'s, 't> {
    tokens: &'t [Token],
    idx: usize,
    end: usize,
    scope: Scope<'s>,
}

impl Parser<'_, '_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.idx).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.idx).map(|t| t.pos).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).cloned();
        self.idx += 1;
        t
    }

    fn sum(&mut self) -> Result<LinExpr> {
        let mut sign = 1.0;
        match self.peek() {
            Some(Tok::Plus) => {
                self.bump();
            }
            Some(Tok::Minus) => {
                self.bump();
                sign = -1.0;
            }
            _ => {}
        }
        let mut acc = LinExpr::default();
        acc.add_scaled(&self.product()?, sign);
        loop {
            let sign = match self.peek() {
                Some(Tok::Plus) => 1.0,
                Some(Tok::Minus) => -1.0,
                _ => break,
            };
            self.bump();
            acc.add_scaled(&self.product()?, sign);
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<LinExpr> {
        let start = self.pos();
        let (mut acc, mut last_was_number) = self.unary()?;
        loop {
            let explicit = matches!(self.peek(), Some(Tok::Star));
            let implicit =
                last_was_number && matches!(self.peek(), Some(Tok::Ident(_)) | Some(Tok::LParen));
            if !explicit && !implicit {
                break;
            }
            if explicit {
                self.bump();
            }
            let (rhs, is_number) = self.unary()?;
            acc = multiply(acc, rhs).ok_or_else(|| syntax(start, "product of two variable terms is not linear"))?;
            last_was_number = is_number;
        }
        Ok(acc)
    }

    /// Returns the parsed factor and whether it was a bare number literal.
    fn unary(&mut self) -> Result<(LinExpr, bool)> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                let (inner, is_number) = self.unary()?;
                Ok((inner.scaled(-1.0), is_number))
            }
            Some(Tok::Plus) => {
                self.bump();
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<(LinExpr, bool)> {
        let pos = self.pos();
        match self.bump().map(|t| t.tok) {
            Some(Tok::Num(v)) => Ok((LinExpr::constant(v), true)),
            Some(Tok::Ident(name)) => self
                .scope
                .resolve(&name)
                .map(|e| (e, false))
                .ok_or(ModelError::UnknownVariable(name)),
            Some(Tok::LParen) => {
                let inner = self.sum()?;
                match self.bump().map(|t| t.tok) {
                    Some(Tok::RParen) => Ok((inner, false)),
                    _ => Err(syntax(pos, "unbalanced parenthesis")),
                }
            }
            Some(Tok::RParen) => Err(syntax(pos, "unexpected `)`")),
            Some(Tok::Rel(s)) => Err(syntax(pos, format!("unexpected relation `{s}`"))),
            Some(other) => Err(syntax(pos, format!("unexpected token {other:?}"))),
            None => Err(syntax(pos, "unexpected end of expression")),
        }
    }
}

fn multiply(a: LinExpr, b: LinExpr) -> Option<LinExpr> {
    if a.is_constant() {
        Some(b.scaled(a.constant))
    } else if b.is_constant() {
        Some(a.scaled(b.constant))
    } else {
        None
    }
}

fn parse_tokens(tokens: &[Token], end: usize, scope: Scope<'_>) -> Result<LinExpr> {
    if tokens.is_empty() {
        return Err(syntax(end, "empty expression"));
    }
    let mut parser = Parser {
        tokens,
        idx: 0,
        end,
        scope,
    };
    let expr = parser.sum()?;
    if parser.idx < tokens.len() {
        return Err(syntax(parser.pos(), "unexpected trailing input"));
    }
    Ok(expr)
}

/// Parses a linear expression over the given decision variables.
pub fn parse_linear_expr(text: &str, vars: &BTreeSet<String>) -> Result<LinExpr> {
    parse_linear_expr_with(text, Scope::vars(vars))
}

pub fn parse_linear_expr_with(text: &str, scope: Scope<'_>) -> Result<LinExpr> {
    let tokens = lex(text)?;
    if let Some(rel) = tokens.iter().find(|t| matches!(t.tok, Tok::Rel(_))) {
        return Err(syntax(rel.pos, "relation symbol inside an expression"));
    }
    parse_tokens(&tokens, text.len(), scope)
}

/// Parses `lhs REL rhs` into a normalized, unnamed constraint.
pub fn parse_constraint(text: &str, vars: &BTreeSet<String>) -> Result<Constraint> {
    parse_constraint_with(text, Scope::vars(vars))
}

pub fn parse_constraint_with(text: &str, scope: Scope<'_>) -> Result<Constraint> {
    let tokens = lex(text)?;
    let rels: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| matches!(t.tok, Tok::Rel(_)))
        .map(|(i, _)| i)
        .collect();
    match rels.as_slice() {
        [] => Err(syntax(text.len(), "missing relation symbol (<=, >=, =)")),
        [at] => {
            let sense = match tokens[*at].tok {
                Tok::Rel(s) => s,
                _ => unreachable!(),
            };
            let rel_pos = tokens[*at].pos;
            let lhs = parse_tokens(&tokens[..*at], rel_pos, scope)?;
            let rhs = parse_tokens(&tokens[at + 1..], text.len(), scope)?;
            Ok(Constraint::from_sides(String::new(), &lhs, sense, &rhs))
        }
        many => Err(ModelError::MultipleRelations(many.len())),
    }
}
