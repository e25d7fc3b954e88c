//! Formula evaluation against a workbook. Never fails: problems surface as
//! `Value::Error`.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::address::{CellAddress, MAX_ROW};
use crate::value::{ErrorKind, Value};
use crate::workbook::{TablePosition, Workbook};

use super::ast::{BinaryOp, Expr, Function};
use super::criteria::{cmp_ignore_case, Criteria};

/// Evaluates `ast` with unqualified references resolved on `sheet`.
pub fn evaluate(ast: &Expr, workbook: &Workbook, sheet: &str) -> Value {
    match workbook.sheet_index(sheet) {
        Some(si) => Evaluator { wb: workbook, sheet: si }.scalar(ast),
        None => Value::Error(ErrorKind::Ref),
    }
}

/// Data cells covered by the whole-column reference `first:last` on `sheet`,
/// skipping header rows and aggregation rows. Ordered by row, then column.
pub fn resolve_column_ref(first: u32, last: u32, workbook: &Workbook, sheet: &str) -> Vec<CellAddress> {
    let Some(s) = workbook.sheet(sheet) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for table in &s.tables {
        let agg = table.aggregation_row();
        for row in 0..table.rows.len() {
            if Some(row) == agg {
                continue;
            }
            for col in 0..table.columns.len() {
                let c = table.grid_column(col);
                if (first..=last).contains(&c) {
                    out.push(table.cell_address(row, col));
                }
            }
        }
    }
    out.sort_by_key(|a| (a.row, a.column));
    out
}

/// A rectangular read over the grid. Whole-column views exclude header and
/// aggregation rows (`None`); plain ranges read every cell, blanks as `Empty`.
struct View<'a> {
    wb: &'a Workbook,
    sheet: usize,
    top: u32,
    left: u32,
    rows: u32,
    cols: u32,
    whole_column: bool,
    /// Rows past this offset are known blank.
    dense: u32,
}

impl View<'_> {
    fn get(&self, i: u32, j: u32) -> Option<Value> {
        if i >= self.dense {
            return self.tail();
        }
        let (column, row) = (self.left + j, self.top + i);
        let s = &self.wb.sheets()[self.sheet];
        match s.table_at(column, row) {
            Some((ti, TablePosition::Data { row: r, column: c })) => {
                let t = &s.tables[ti];
                if self.whole_column && t.aggregation_row() == Some(r) {
                    None
                } else {
                    Some(t.rows[r].cells[c].cached.clone())
                }
            }
            Some((ti, TablePosition::Header { column: c })) => {
                (!self.whole_column).then(|| Value::Text(s.tables[ti].columns[c].header.clone()))
            }
            None => (!self.whole_column).then_some(Value::Empty),
        }
    }

    fn tail(&self) -> Option<Value> {
        (!self.whole_column).then_some(Value::Empty)
    }

    fn shape(&self) -> (u32, u32) {
        (self.rows, self.cols)
    }

    /// Every (possibly excluded) value in the dense part, row-major.
    fn dense_values(&self) -> impl Iterator<Item = Option<Value>> + '_ {
        (0..self.dense).flat_map(move |i| (0..self.cols).map(move |j| self.get(i, j)))
    }
}

struct Evaluator<'a> {
    wb: &'a Workbook,
    sheet: usize,
}

enum Arg<'a> {
    Scalar(Value),
    Grid(View<'a>),
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(v)
    } else {
        Value::Error(ErrorKind::Value)
    }
}

impl<'a> Evaluator<'a> {
    fn sheet_of(&self, name: Option<&str>) -> Result<usize, ErrorKind> {
        match name {
            None => Ok(self.sheet),
            Some(n) => self.wb.sheet_index(n).ok_or(ErrorKind::Ref),
        }
    }

    fn view(&self, e: &Expr) -> Result<View<'a>, ErrorKind> {
        let (sheet, top, left, rows, cols, whole_column) = match e {
            Expr::Cell(a) => (self.sheet_of(a.sheet.as_deref())?, a.row, a.column, 1, 1, false),
            Expr::Range(a, b) => (
                self.sheet_of(a.sheet.as_deref())?,
                a.row,
                a.column,
                b.row - a.row + 1,
                b.column - a.column + 1,
                false,
            ),
            Expr::Column { sheet, first, last } => {
                (self.sheet_of(sheet.as_deref())?, 1, *first, MAX_ROW, last - first + 1, true)
            }
            _ => return Err(ErrorKind::Value),
        };
        let max_row = self.wb.sheets()[sheet].max_row();
        let dense = (max_row + 1).saturating_sub(top).min(rows);
        Ok(View { wb: self.wb, sheet, top, left, rows, cols, whole_column, dense })
    }

    fn is_reference(e: &Expr) -> bool {
        matches!(e, Expr::Cell(_) | Expr::Range(..) | Expr::Column { .. })
    }

    fn arg(&self, e: &Expr) -> Result<Arg<'a>, ErrorKind> {
        if Self::is_reference(e) {
            self.view(e).map(Arg::Grid)
        } else {
            Ok(Arg::Scalar(self.scalar(e)))
        }
    }

    fn scalar(&self, e: &Expr) -> Value {
        match e {
            Expr::Literal(v) => v.clone(),
            Expr::Cell(a) => match self.sheet_of(a.sheet.as_deref()) {
                Ok(si) => self.wb.value_at(si, a.column, a.row),
                Err(k) => Value::Error(k),
            },
            Expr::Range(..) | Expr::Column { .. } => Value::Error(ErrorKind::Value),
            Expr::Neg(inner) => match self.scalar(inner).to_number() {
                Ok(n) => num(-n),
                Err(k) => Value::Error(k),
            },
            Expr::Binary(op, l, r) => self.binary(*op, l, r),
            Expr::Call(f, args) => self.call(*f, args),
            Expr::Criteria(c) => Value::Text(alloc::format!("{c}")),
            Expr::UnknownCall(..) | Expr::Name(_) => Value::Error(ErrorKind::Name),
        }
    }

    fn binary(&self, op: BinaryOp, l: &Expr, r: &Expr) -> Value {
        let lv = self.scalar(l);
        let rv = self.scalar(r);
        if let Some(k) = lv.as_error() {
            return Value::Error(k);
        }
        if let Some(k) = rv.as_error() {
            return Value::Error(k);
        }
        match op {
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                let (a, b) = match (lv.to_number(), rv.to_number()) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(k), _) | (_, Err(k)) => return Value::Error(k),
                };
                match op {
                    BinaryOp::Add => num(a + b),
                    BinaryOp::Sub => num(a - b),
                    BinaryOp::Mul => num(a * b),
                    _ if b == 0.0 => Value::Error(ErrorKind::Div0),
                    _ => num(a / b),
                }
            }
            BinaryOp::Concat => {
                let mut s = lv.display();
                s.push_str(&rv.display());
                Value::Text(s)
            }
            _ => {
                let ord = compare(&lv, &rv);
                Value::Boolean(match op {
                    BinaryOp::Eq => ord == Ordering::Equal,
                    BinaryOp::Ne => ord != Ordering::Equal,
                    BinaryOp::Lt => ord == Ordering::Less,
                    BinaryOp::Le => ord != Ordering::Greater,
                    BinaryOp::Gt => ord == Ordering::Greater,
                    _ => ord != Ordering::Less,
                })
            }
        }
    }

    fn call(&self, f: Function, args: &[Expr]) -> Value {
        let result = match f {
            Function::If => return self.if_(args),
            Function::Sum => self.fold_numbers(args).map(|(sum, _)| num(sum)),
            Function::Average => self.fold_numbers(args).and_then(|(sum, n)| {
                if n == 0 {
                    Err(ErrorKind::Div0)
                } else {
                    Ok(num(sum / n as f64))
                }
            }),
            Function::Count => Ok(Value::Number(self.count(args) as f64)),
            Function::Min => self.extreme(args, Ordering::Less),
            Function::Max => self.extreme(args, Ordering::Greater),
            Function::SumIf => self.sum_if(args),
            Function::SumIfs => self.sum_ifs(args),
            Function::CountIf | Function::CountIfs => self.count_ifs(args),
        };
        result.unwrap_or_else(Value::Error)
    }

    fn if_(&self, args: &[Expr]) -> Value {
        let cond = match self.scalar(&args[0]).to_bool() {
            Ok(b) => b,
            Err(k) => return Value::Error(k),
        };
        if cond {
            self.scalar(&args[1])
        } else {
            args.get(2).map_or(Value::Boolean(false), |e| self.scalar(e))
        }
    }

    /// Numbers from all arguments; range cells that are not numbers are skipped.
    fn for_each_number(
        &self,
        args: &[Expr],
        mut sink: impl FnMut(f64),
    ) -> Result<(), ErrorKind> {
        for a in args {
            match self.arg(a)? {
                Arg::Scalar(v) => sink(v.to_number()?),
                Arg::Grid(view) => {
                    for v in view.dense_values().flatten() {
                        match v {
                            Value::Number(n) => sink(n),
                            Value::Error(k) => return Err(k),
                            _ => {}
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn fold_numbers(&self, args: &[Expr]) -> Result<(f64, usize), ErrorKind> {
        let mut total = 0.0;
        let mut n = 0usize;
        self.for_each_number(args, |x| {
            total += x;
            n += 1;
        })?;
        Ok((total, n))
    }

    fn extreme(&self, args: &[Expr], want: Ordering) -> Result<Value, ErrorKind> {
        let mut best: Option<f64> = None;
        self.for_each_number(args, |x| {
            if best.is_none_or(|b| x.partial_cmp(&b) == Some(want)) {
                best = Some(x);
            }
        })?;
        Ok(Value::Number(best.unwrap_or(0.0)))
    }

    fn count(&self, args: &[Expr]) -> usize {
        let mut n = 0;
        for a in args {
            match self.arg(a) {
                Ok(Arg::Scalar(v)) => n += usize::from(matches!(v, Value::Number(_) | Value::Date(_))),
                Ok(Arg::Grid(view)) => {
                    n += view
                        .dense_values()
                        .filter(|v| matches!(v, Some(Value::Number(_) | Value::Date(_))))
                        .count();
                }
                Err(_) => {}
            }
        }
        n
    }

    fn criteria(&self, e: &Expr) -> Result<Criteria, ErrorKind> {
        match e {
            Expr::Criteria(c) => Ok(c.clone()),
            other => {
                let v = self.scalar(other);
                match v {
                    Value::Error(k) => Err(k),
                    v => Ok(Criteria::from_value(&v)),
                }
            }
        }
    }

    fn sum_if(&self, args: &[Expr]) -> Result<Value, ErrorKind> {
        let range = self.view(&args[0])?;
        let crit = self.criteria(&args[1])?;
        let sum_range = match args.get(2) {
            Some(e) => self.view(e)?,
            None => self.view(&args[0])?,
        };
        self.conditional_sum(&sum_range, &[(range, crit)])
    }

    fn sum_ifs(&self, args: &[Expr]) -> Result<Value, ErrorKind> {
        let sum_range = self.view(&args[0])?;
        let pairs = self.pairs(&args[1..])?;
        self.conditional_sum(&sum_range, &pairs)
    }

    fn count_ifs(&self, args: &[Expr]) -> Result<Value, ErrorKind> {
        let pairs = self.pairs(args)?;
        let shape = pairs[0].0.shape();
        if pairs.iter().any(|(v, _)| v.shape() != shape) {
            return Err(ErrorKind::Value);
        }
        let dense = pairs.iter().map(|(v, _)| v.dense).max().unwrap_or(0);
        let mut n: u64 = 0;
        for i in 0..dense {
            for j in 0..shape.1 {
                if pairs.iter().all(|(v, c)| v.get(i, j).is_some_and(|x| c.matches(&x))) {
                    n += 1;
                }
            }
        }
        if pairs.iter().all(|(v, c)| v.tail().is_some_and(|x| c.matches(&x))) {
            n += u64::from(shape.0 - dense) * u64::from(shape.1);
        }
        Ok(Value::Number(n as f64))
    }

    fn pairs(&self, args: &[Expr]) -> Result<Vec<(View<'a>, Criteria)>, ErrorKind> {
        args.chunks(2)
            .map(|p| Ok((self.view(&p[0])?, self.criteria(&p[1])?)))
            .collect()
    }

    fn conditional_sum(&self, sum_range: &View<'_>, pairs: &[(View<'_>, Criteria)]) -> Result<Value, ErrorKind> {
        let shape = sum_range.shape();
        if pairs.iter().any(|(v, _)| v.shape() != shape) {
            return Err(ErrorKind::Value);
        }
        let dense = pairs.iter().map(|(v, _)| v.dense).chain([sum_range.dense]).max().unwrap_or(0);
        let mut total = 0.0;
        for i in 0..dense {
            for j in 0..shape.1 {
                if !pairs.iter().all(|(v, c)| v.get(i, j).is_some_and(|x| c.matches(&x))) {
                    continue;
                }
                match sum_range.get(i, j) {
                    Some(Value::Number(n)) => total += n,
                    Some(Value::Error(k)) => return Err(k),
                    _ => {}
                }
            }
        }
        Ok(num(total))
    }
}

fn type_rank(v: &Value) -> u8 {
    match v {
        Value::Number(_) => 0,
        Value::Date(_) => 1,
        Value::Text(_) => 2,
        Value::Boolean(_) => 3,
        Value::Empty | Value::Error(_) => 4,
    }
}

/// Spreadsheet comparison: numbers < dates < text < booleans; an empty
/// operand takes the other side's zero value; text compares case-insensitively.
pub(crate) fn compare(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Empty, Value::Empty) => Ordering::Equal,
        (Value::Empty, Value::Date(_)) => Ordering::Less,
        (Value::Date(_), Value::Empty) => Ordering::Greater,
        (Value::Empty, other) => compare(&zero_like(other), other),
        (other, Value::Empty) => compare(other, &zero_like(other)),
        (Value::Number(x), Value::Number(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
        (Value::Date(x), Value::Date(y)) => x.cmp(y),
        (Value::Text(x), Value::Text(y)) => cmp_ignore_case(x, y),
        (Value::Boolean(x), Value::Boolean(y)) => x.cmp(y),
        _ => type_rank(a).cmp(&type_rank(b)),
    }
}

fn zero_like(v: &Value) -> Value {
    match v {
        Value::Number(_) => Value::Number(0.0),
        Value::Text(_) => Value::Text(String::new()),
        Value::Boolean(_) => Value::Boolean(false),
        other => other.clone(),
    }
}
