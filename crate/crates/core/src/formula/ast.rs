use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::address::{write_sheet_prefix, CellAddress, ColumnLetters};
use crate::value::{DisplayNumber, Value};

use super::criteria::Criteria;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Sum,
    Average,
    Count,
    Min,
    Max,
    If,
    SumIf,
    SumIfs,
    CountIf,
    CountIfs,
}

impl Function {
    pub const ALL: [Function; 10] = [
        Function::Sum,
        Function::Average,
        Function::Count,
        Function::Min,
        Function::Max,
        Function::If,
        Function::SumIf,
        Function::SumIfs,
        Function::CountIf,
        Function::CountIfs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Sum => "SUM",
            Function::Average => "AVERAGE",
            Function::Count => "COUNT",
            Function::Min => "MIN",
            Function::Max => "MAX",
            Function::If => "IF",
            Function::SumIf => "SUMIF",
            Function::SumIfs => "SUMIFS",
            Function::CountIf => "COUNTIF",
            Function::CountIfs => "COUNTIFS",
        }
    }

    pub fn lookup(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name))
    }

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            Function::Sum | Function::Average | Function::Count | Function::Min | Function::Max => {
                n >= 1
            }
            Function::If => (2..=3).contains(&n),
            Function::SumIf => (2..=3).contains(&n),
            Function::CountIf => n == 2,
            Function::SumIfs => n >= 3 && n % 2 == 1,
            Function::CountIfs => n >= 2 && n.is_multiple_of(2),
        }
    }

    pub fn arity_hint(self) -> &'static str {
        match self {
            Function::Sum | Function::Average | Function::Count | Function::Min | Function::Max => {
                "at least 1 argument"
            }
            Function::If | Function::SumIf => "2 or 3 arguments",
            Function::CountIf => "exactly 2 arguments",
            Function::SumIfs => "an odd number of arguments, at least 3",
            Function::CountIfs => "an even number of arguments, at least 2",
        }
    }

    /// Whether argument `index` is a criteria slot.
    pub fn is_criteria_arg(self, index: usize) -> bool {
        match self {
            Function::SumIf | Function::CountIf => index == 1,
            Function::SumIfs => index >= 2 && index.is_multiple_of(2),
            Function::CountIfs => index % 2 == 1,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Concat,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Concat => "&",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 1,
            BinaryOp::Concat => 2,
            BinaryOp::Add | BinaryOp::Sub => 3,
            BinaryOp::Mul | BinaryOp::Div => 4,
        }
    }
}

const UNARY_PRECEDENCE: u8 = 5;
const ATOM_PRECEDENCE: u8 = 6;

/// Parsed formula expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Cell(CellAddress),
    /// Normalized so that `start` is the top-left corner. The sheet lives on `start`.
    Range(CellAddress, CellAddress),
    /// Whole-column reference such as `C:C` (or `A:C`).
    Column { sheet: Option<String>, first: u32, last: u32 },
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
    /// A string literal in a criteria slot, parsed eagerly.
    Criteria(Criteria),
    /// Call to a function outside the supported set; evaluates to `#NAME?`.
    UnknownCall(String, Vec<Expr>),
    /// Bare identifier that is not a reference; evaluates to `#NAME?`.
    Name(String),
}

/// Something a formula reads from the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reference {
    Cell(CellAddress),
    Range(CellAddress, CellAddress),
    Column { sheet: Option<String>, first: u32, last: u32 },
}

impl Reference {
    pub fn sheet(&self) -> Option<&str> {
        match self {
            Reference::Cell(a) | Reference::Range(a, _) => a.sheet.as_deref(),
            Reference::Column { sheet, .. } => sheet.as_deref(),
        }
    }
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => UNARY_PRECEDENCE,
            _ => ATOM_PRECEDENCE,
        }
    }

    pub fn references(&self) -> Vec<Reference> {
        let mut out = Vec::new();
        self.collect_references(&mut out);
        out
    }

    fn collect_references(&self, out: &mut Vec<Reference>) {
        match self {
            Expr::Cell(a) => out.push(Reference::Cell(a.clone())),
            Expr::Range(a, b) => out.push(Reference::Range(a.clone(), b.clone())),
            Expr::Column { sheet, first, last } => out.push(Reference::Column {
                sheet: sheet.clone(),
                first: *first,
                last: *last,
            }),
            Expr::Neg(e) => e.collect_references(out),
            Expr::Binary(_, l, r) => {
                l.collect_references(out);
                r.collect_references(out);
            }
            Expr::Call(_, args) | Expr::UnknownCall(_, args) => {
                for a in args {
                    a.collect_references(out);
                }
            }
            Expr::Literal(_) | Expr::Criteria(_) | Expr::Name(_) => {}
        }
    }

    pub fn contains_call(&self) -> bool {
        match self {
            Expr::Call(..) | Expr::UnknownCall(..) => true,
            Expr::Neg(e) => e.contains_call(),
            Expr::Binary(_, l, r) => l.contains_call() || r.contains_call(),
            _ => false,
        }
    }

    /// Applies `f` to every cell address embedded in the expression (range corners included).
    /// Returns whether anything changed.
    pub fn rewrite_addresses(&mut self, f: &mut dyn FnMut(&mut CellAddress) -> bool) -> bool {
        match self {
            Expr::Cell(a) => f(a),
            Expr::Range(a, b) => {
                let sheet = a.sheet.clone();
                // the end corner inherits the start's sheet
                b.sheet.clone_from(&sheet);
                let changed = f(a) | f(b);
                b.sheet = None;
                changed
            }
            Expr::Neg(e) => e.rewrite_addresses(f),
            Expr::Binary(_, l, r) => l.rewrite_addresses(f) | r.rewrite_addresses(f),
            Expr::Call(_, args) | Expr::UnknownCall(_, args) => {
                let mut changed = false;
                for a in args {
                    changed |= a.rewrite_addresses(f);
                }
                changed
            }
            Expr::Column { .. } | Expr::Literal(_) | Expr::Criteria(_) | Expr::Name(_) => false,
        }
    }

    /// Applies `f` to every explicit sheet qualifier.
    pub fn rewrite_sheets(&mut self, f: &mut dyn FnMut(&mut String) -> bool) -> bool {
        match self {
            Expr::Cell(a) | Expr::Range(a, _) => a.sheet.as_mut().is_some_and(f),
            Expr::Column { sheet, .. } => sheet.as_mut().is_some_and(f),
            Expr::Neg(e) => e.rewrite_sheets(f),
            Expr::Binary(_, l, r) => l.rewrite_sheets(f) | r.rewrite_sheets(f),
            Expr::Call(_, args) | Expr::UnknownCall(_, args) => {
                let mut changed = false;
                for a in args {
                    changed |= a.rewrite_sheets(f);
                }
                changed
            }
            Expr::Literal(_) | Expr::Criteria(_) | Expr::Name(_) => false,
        }
    }
}

fn write_string_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for part in s.split('"').enumerate() {
        if part.0 > 0 {
            f.write_str("\"\"")?;
        }
        f.write_str(part.1)?;
    }
    f.write_str("\"")
}

fn write_args(f: &mut fmt::Formatter<'_>, name: &str, args: &[Expr]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Expr {
    /// Pretty-prints without the leading `=`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(Value::Number(n)) if *n < 0.0 => write!(f, "({})", DisplayNumber(*n)),
            Expr::Literal(Value::Number(n)) => write!(f, "{}", DisplayNumber(*n)),
            Expr::Literal(Value::Text(s)) => write_string_literal(f, s),
            Expr::Literal(other) => write!(f, "{other}"),
            Expr::Cell(a) => write!(f, "{a}"),
            Expr::Range(a, b) => write!(f, "{a}:{}{}", ColumnLetters(b.column), b.row),
            Expr::Column { sheet, first, last } => {
                if let Some(s) = sheet {
                    write_sheet_prefix(f, s)?;
                }
                write!(f, "{}:{}", ColumnLetters(*first), ColumnLetters(*last))
            }
            Expr::Neg(e) => {
                if e.precedence() < UNARY_PRECEDENCE {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if l.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                f.write_str(op.symbol())?;
                if r.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            Expr::Call(func, args) => write_args(f, func.name(), args),
            Expr::UnknownCall(name, args) => write_args(f, name, args),
            Expr::Criteria(c) => write_string_literal(f, &alloc::format!("{c}")),
            Expr::Name(n) => f.write_str(n),
        }
    }
}
