//! The comparison mini-language shared by `SUMIF(S)`, `COUNTIF(S)`, `filter_rows` and
//! the highlight tools: an optional operator prefix followed by an operand, e.g.
//! `">=2023-04-01"`, `"<>Travel"`, `"5"`.

use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;

use crate::value::{parse_iso_date, parse_number, DisplayDate, DisplayNumber, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriteriaOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CriteriaOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CriteriaOp::Eq => "=",
            CriteriaOp::Ne => "<>",
            CriteriaOp::Lt => "<",
            CriteriaOp::Le => "<=",
            CriteriaOp::Gt => ">",
            CriteriaOp::Ge => ">=",
        }
    }

    fn test(self, ord: Ordering) -> bool {
        match self {
            CriteriaOp::Eq => ord == Ordering::Equal,
            CriteriaOp::Ne => ord != Ordering::Equal,
            CriteriaOp::Lt => ord == Ordering::Less,
            CriteriaOp::Le => ord != Ordering::Greater,
            CriteriaOp::Gt => ord == Ordering::Greater,
            CriteriaOp::Ge => ord != Ordering::Less,
        }
    }
}

/// A parsed criteria string. The operand is a Number, Date or Text value.
#[derive(Debug, Clone, PartialEq)]
pub struct Criteria {
    pub op: CriteriaOp,
    pub operand: Value,
}

impl Criteria {
    pub fn new(op: CriteriaOp, operand: Value) -> Self {
        Self { op, operand }
    }

    /// Total: every string yields a criteria. Bare strings mean equality.
    pub fn parse(s: &str) -> Self {
        const PREFIXES: [(&str, CriteriaOp); 6] = [
            (">=", CriteriaOp::Ge),
            ("<=", CriteriaOp::Le),
            ("<>", CriteriaOp::Ne),
            (">", CriteriaOp::Gt),
            ("<", CriteriaOp::Lt),
            ("=", CriteriaOp::Eq),
        ];
        let (op, rest) = PREFIXES
            .iter()
            .find_map(|(p, op)| s.strip_prefix(p).map(|rest| (*op, rest)))
            .unwrap_or((CriteriaOp::Eq, s));
        Self { op, operand: coerce_operand(rest) }
    }

    /// Criteria built from a computed argument (e.g. a cell reference in `SUMIFS`).
    pub fn from_value(value: &Value) -> Self {
        match value {
            Value::Text(s) => Self::parse(s),
            Value::Empty => Self::new(CriteriaOp::Eq, Value::Text(String::new())),
            Value::Boolean(_) => Self::new(CriteriaOp::Eq, Value::Text(value.to_string())),
            other => Self::new(CriteriaOp::Eq, other.clone()),
        }
    }

    pub fn matches(&self, cell: &Value) -> bool {
        if matches!(cell, Value::Error(_)) {
            return false;
        }
        match &self.operand {
            Value::Number(n) => match cell {
                Value::Number(c) => self.op.test(c.partial_cmp(n).unwrap_or(Ordering::Less)),
                _ => self.op == CriteriaOp::Ne,
            },
            Value::Date(d) => match cell {
                Value::Date(c) => self.op.test(c.cmp(d)),
                _ => self.op == CriteriaOp::Ne,
            },
            Value::Text(t) => self.matches_text(t, cell),
            // from_value never builds these; treat them as a never-equal operand
            _ => self.op == CriteriaOp::Ne,
        }
    }

    fn matches_text(&self, operand: &str, cell: &Value) -> bool {
        if operand.is_empty() {
            let blank = match cell {
                Value::Empty => true,
                Value::Text(s) => s.is_empty(),
                _ => false,
            };
            return match self.op {
                CriteriaOp::Eq => blank,
                CriteriaOp::Ne => !blank,
                _ => false,
            };
        }
        let cell_text = match cell {
            Value::Text(s) => s.as_str(),
            Value::Boolean(true) => "TRUE",
            Value::Boolean(false) => "FALSE",
            _ => return self.op == CriteriaOp::Ne,
        };
        self.op.test(cmp_ignore_case(cell_text, operand))
    }
}

fn coerce_operand(rest: &str) -> Value {
    if let Some(n) = parse_number(rest) {
        Value::Number(n)
    } else if let Some(d) = parse_iso_date(rest) {
        Value::Date(d)
    } else {
        Value::Text(rest.into())
    }
}

pub(crate) fn cmp_ignore_case(a: &str, b: &str) -> Ordering {
    a.chars()
        .flat_map(char::to_lowercase)
        .cmp(b.chars().flat_map(char::to_lowercase))
}

impl fmt::Display for Criteria {
    /// Canonical text; `Criteria::parse` of the output yields an equal criteria.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let operand = match &self.operand {
            Value::Number(n) => DisplayNumber(*n).to_string(),
            Value::Date(d) => DisplayDate(*d).to_string(),
            other => other.to_string(),
        };
        let ambiguous = operand.is_empty()
            || operand.starts_with(['<', '>', '='])
            || (matches!(self.operand, Value::Text(_)) && coerce_operand(&operand) != self.operand);
        if self.op != CriteriaOp::Eq || ambiguous {
            f.write_str(self.op.symbol())?;
        }
        f.write_str(&operand)
    }
}
