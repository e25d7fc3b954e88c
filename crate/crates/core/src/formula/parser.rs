//! Recursive-descent parser for formula text.
//!
//! Precedence, loosest first: comparisons, `&`, `+ -`, `* /`, unary minus.
//! All binary operators associate to the left.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::address::{column_index, scan_cell, CellAddress, MAX_COLUMN, MAX_ROW};
use crate::value::Value;

use super::ast::{BinaryOp, Expr, Function};
use super::criteria::Criteria;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("{function} expects {expected}, got {got}")]
    Arity { function: &'static str, expected: &'static str, got: usize },
}

impl FormulaError {
    fn at(position: usize, message: impl Into<String>) -> Self {
        FormulaError::Parse { position, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Str(String),
    Word(String),
    QuotedSheet(String),
    Bang,
    Colon,
    LParen,
    RParen,
    Comma,
    Op(BinaryOp),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str, start: usize) -> Result<Vec<(usize, Tok)>, FormulaError> {
        let mut lx = Lexer { src, pos: start };
        let mut out = Vec::new();
        loop {
            let (at, tok) = lx.next()?;
            let end = tok == Tok::End;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(usize, Tok), FormulaError> {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += self.peek().map_or(1, char::len_utf8);
        }
        let at = self.pos;
        let Some(c) = self.peek() else {
            return Ok((at, Tok::End));
        };
        let rest = &self.src[at..];
        let two = |s: &str| rest.starts_with(s);
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            ':' => (Tok::Colon, 1),
            '!' => (Tok::Bang, 1),
            '+' => (Tok::Op(BinaryOp::Add), 1),
            '-' => (Tok::Op(BinaryOp::Sub), 1),
            '*' => (Tok::Op(BinaryOp::Mul), 1),
            '/' => (Tok::Op(BinaryOp::Div), 1),
            '&' => (Tok::Op(BinaryOp::Concat), 1),
            '=' => (Tok::Op(BinaryOp::Eq), 1),
            '<' if two("<>") => (Tok::Op(BinaryOp::Ne), 2),
            '<' if two("<=") => (Tok::Op(BinaryOp::Le), 2),
            '<' => (Tok::Op(BinaryOp::Lt), 1),
            '>' if two(">=") => (Tok::Op(BinaryOp::Ge), 2),
            '>' => (Tok::Op(BinaryOp::Gt), 1),
            '"' => return self.string(at),
            '\'' => return self.quoted_sheet(at),
            c if c.is_ascii_digit() || c == '.' => return self.number(at),
            c if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
                let len = rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || matches!(ch, '_' | '$' | '.')))
                    .unwrap_or(rest.len());
                (Tok::Word(rest[..len].into()), len)
            }
            other => return Err(FormulaError::at(at, alloc::format!("unexpected character `{other}`"))),
        };
        self.pos += len;
        Ok((at, tok))
    }

    fn number(&mut self, at: usize) -> Result<(usize, Tok), FormulaError> {
        let b = self.src.as_bytes();
        let mut i = at;
        while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
            i += 1;
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = &self.src[at..i];
        let n = text
            .parse::<f64>()
            .ok()
            .filter(|n| n.is_finite())
            .ok_or_else(|| FormulaError::at(at, alloc::format!("invalid number `{text}`")))?;
        self.pos = i;
        Ok((at, Tok::Number(n)))
    }

    fn string(&mut self, at: usize) -> Result<(usize, Tok), FormulaError> {
        let mut out = String::new();
        let mut i = at + 1;
        loop {
            let Some(c) = self.src[i..].chars().next() else {
                return Err(FormulaError::at(i, "unterminated string"));
            };
            i += c.len_utf8();
            if c == '"' {
                if self.src[i..].starts_with('"') {
                    out.push('"');
                    i += 1;
                } else {
                    break;
                }
            } else {
                out.push(c);
            }
        }
        self.pos = i;
        Ok((at, Tok::Str(out)))
    }

    fn quoted_sheet(&mut self, at: usize) -> Result<(usize, Tok), FormulaError> {
        let rest = &self.src[at + 1..];
        let end = rest.find('\'').ok_or_else(|| FormulaError::at(at, "unterminated sheet name"))?;
        self.pos = at + 1 + end + 1;
        Ok((at, Tok::QuotedSheet(rest[..end].into())))
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
}

/// Parses formula text. The text must begin with `=`.
pub fn parse_formula(text: &str) -> Result<Expr, FormulaError> {
    if !text.starts_with('=') {
        return Err(FormulaError::at(0, "formula must begin with `=`"));
    }
    let mut p = Parser { toks: Lexer::tokens(text, 1)?, i: 0 };
    if matches!(p.peek(), Tok::End) {
        return Err(FormulaError::at(p.pos(), "empty formula"));
    }
    let expr = p.expr(0)?;
    match p.peek() {
        Tok::End => Ok(expr),
        _ => Err(FormulaError::at(p.pos(), "unexpected trailing input")),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].1
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].1
    }

    fn pos(&self) -> usize {
        self.toks[self.i].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].1.clone();
        if self.i < self.toks.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), FormulaError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(FormulaError::at(self.pos(), alloc::format!("expected {what}")))
        }
    }

    fn expr(&mut self, min_prec: u8) -> Result<Expr, FormulaError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op) = *self.peek() {
            let prec = op.precedence();
            if prec <= min_prec {
                break;
            }
            self.bump();
            let rhs = self.expr(prec)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FormulaError> {
        match self.peek() {
            Tok::Op(BinaryOp::Sub) => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op(BinaryOp::Add) => {
                self.bump();
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, FormulaError> {
        let at = self.pos();
        match self.bump() {
            Tok::Number(n) => Ok(Expr::Literal(Value::Number(n))),
            Tok::Str(s) => Ok(Expr::Literal(Value::Text(s))),
            Tok::LParen => {
                let e = self.expr(0)?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::QuotedSheet(sheet) => {
                self.expect(&Tok::Bang, "`!` after sheet name")?;
                self.reference(Some(sheet))
            }
            Tok::Word(w) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    return self.call(w);
                }
                if *self.peek() == Tok::Bang {
                    self.bump();
                    return self.reference(Some(w));
                }
                self.i -= 1;
                self.reference(None)
            }
            Tok::End => Err(FormulaError::at(at, "unexpected end of formula")),
            _ => Err(FormulaError::at(at, "expected a value, reference or function")),
        }
    }

    fn reference(&mut self, sheet: Option<String>) -> Result<Expr, FormulaError> {
        let at = self.pos();
        let Tok::Word(w) = self.bump() else {
            return Err(FormulaError::at(at, "expected a cell reference"));
        };
        if sheet.is_none() {
            if w.eq_ignore_ascii_case("TRUE") {
                return Ok(Expr::Literal(Value::Boolean(true)));
            }
            if w.eq_ignore_ascii_case("FALSE") {
                return Ok(Expr::Literal(Value::Boolean(false)));
            }
        }
        if let Some(start) = cell(&w) {
            if *self.peek() == Tok::Colon {
                self.bump();
                let end_at = self.pos();
                let end = match self.bump() {
                    Tok::Word(e) => cell(&e),
                    _ => None,
                }
                .ok_or_else(|| FormulaError::at(end_at, "expected a cell after `:`"))?;
                let (a, b) = normalize(start, end);
                return Ok(Expr::Range(CellAddress { sheet, ..a }, b));
            }
            return Ok(Expr::Cell(CellAddress { sheet, ..start }));
        }
        if let Some(first) = column(&w) {
            if *self.peek() == Tok::Colon {
                self.bump();
                let end_at = self.pos();
                let last = match self.bump() {
                    Tok::Word(e) => column(&e),
                    _ => None,
                }
                .ok_or_else(|| FormulaError::at(end_at, "expected a column after `:`"))?;
                return Ok(Expr::Column { sheet, first: first.min(last), last: first.max(last) });
            }
        }
        if sheet.is_some() {
            return Err(FormulaError::at(at, alloc::format!("invalid reference `{w}`")));
        }
        Ok(Expr::Name(w))
    }

    fn call(&mut self, name: String) -> Result<Expr, FormulaError> {
        let func = Function::lookup(&name);
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            self.bump();
        } else {
            loop {
                let index = args.len();
                let arg = match (func, self.peek(), self.peek_at(1)) {
                    (Some(f), Tok::Str(s), Tok::Comma | Tok::RParen) if f.is_criteria_arg(index) => {
                        let c = Criteria::parse(s);
                        self.bump();
                        Expr::Criteria(c)
                    }
                    _ => self.expr(0)?,
                };
                args.push(arg);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => {
                        self.bump();
                        break;
                    }
                    _ => return Err(FormulaError::at(self.pos(), "expected `,` or `)`")),
                }
            }
        }
        match func {
            Some(f) if !f.arity_ok(args.len()) => Err(FormulaError::Arity {
                function: f.name(),
                expected: f.arity_hint(),
                got: args.len(),
            }),
            Some(f) => Ok(Expr::Call(f, args)),
            None => Ok(Expr::UnknownCall(name.to_ascii_uppercase(), args)),
        }
    }
}

fn cell(word: &str) -> Option<CellAddress> {
    let (column, row, n) = scan_cell(word)?;
    (n == word.len() && column <= MAX_COLUMN && row <= MAX_ROW).then(|| CellAddress::new(column, row))
}

fn column(word: &str) -> Option<u32> {
    column_index(word.trim_start_matches('$')).filter(|_| word.matches('$').count() <= 1)
}

fn normalize(a: CellAddress, b: CellAddress) -> (CellAddress, CellAddress) {
    (
        CellAddress::new(a.column.min(b.column), a.row.min(b.row)),
        CellAddress::new(a.column.max(b.column), a.row.max(b.row)),
    )
}
