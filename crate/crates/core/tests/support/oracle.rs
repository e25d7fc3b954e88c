//! Brute-force reference interpreter for random tables and formulas.
//!
//! The table sits at A1 with a header row. Column A holds short category
//! strings, the other columns hold numbers; any cell may be blank. Formulas are
//! generated as a small AST, rendered to text for the engine, and evaluated here
//! by scanning every grid row a reference covers.

use proptest::prelude::RngExt;
use proptest::test_runner::{RngAlgorithm, TestRng};
use tabwright_core::workbook::{CellContent, ColumnSpec, TableKind, TableSpec, ValueType, DEFAULT_SHEET};
use tabwright_core::{CellAddress, ErrorKind, Value, Workbook};

#[derive(Debug, Clone, PartialEq)]
pub enum OCell {
    Num(f64),
    Text(String),
    Blank,
}

#[derive(Debug, Clone)]
pub struct OTable {
    pub numeric_columns: usize,
    pub rows: Vec<Vec<OCell>>,
    pub integer: bool,
}

impl OTable {
    pub fn width(&self) -> usize {
        self.numeric_columns + 1
    }

    pub fn header(col: usize) -> String {
        format!("H{col}")
    }

    /// Cell at a 0-based column and 1-based grid row.
    pub fn at(&self, col: usize, row: u32) -> OCell {
        match row {
            1 => OCell::Text(Self::header(col)),
            r if (r as usize) <= self.rows.len() + 1 && r >= 2 => self.rows[r as usize - 2][col].clone(),
            _ => OCell::Blank,
        }
    }

    pub fn workbook(&self) -> Workbook {
        let mut columns = vec![ColumnSpec::new(Self::header(0), ValueType::Text)];
        columns.extend((1..self.width()).map(|c| ColumnSpec::new(Self::header(c), ValueType::Number)));
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| {
                        CellContent::Literal(match c {
                            OCell::Num(n) => Value::Number(*n),
                            OCell::Text(s) => Value::Text(s.clone()),
                            OCell::Blank => Value::Empty,
                        })
                    })
                    .collect()
            })
            .collect();
        let spec = TableSpec::new("T", TableKind::Data, columns).with_rows(rows);
        let mut wb = Workbook::new();
        wb.place_table(DEFAULT_SHEET, spec, &CellAddress::new(1, 1)).expect("fresh sheet has room");
        wb
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    const ALL: [Cmp; 6] = [Cmp::Eq, Cmp::Ne, Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge];

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ne => "<>",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Cmp::Eq => ord == Equal,
            Cmp::Ne => ord != Equal,
            Cmp::Lt => ord == Less,
            Cmp::Le => ord != Greater,
            Cmp::Gt => ord == Greater,
            Cmp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ORef {
    /// 0-based column, inclusive 1-based grid rows.
    Range { col: usize, top: u32, bottom: u32 },
    /// Whole column: the table's data rows only.
    Column(usize),
}

#[derive(Debug, Clone)]
pub enum OCrit {
    Num(Cmp, i64),
    Text(Cmp, String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agg {
    Sum,
    Average,
    Count,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Arith {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone)]
pub enum OExpr {
    Lit(i64),
    Cell(usize, u32),
    Agg(Agg, Vec<ORef>),
    SumIf(ORef, OCrit, Option<ORef>),
    SumIfs(ORef, Vec<(ORef, OCrit)>),
    CountIfs(Vec<(ORef, OCrit)>),
    Arith(Arith, Box<OExpr>, Box<OExpr>),
    If(Cmp, Box<OExpr>, Box<OExpr>, Box<OExpr>, Box<OExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OVal {
    Num(f64),
    Text(String),
    Blank,
    Err(ErrorKind),
}

fn letter(col: usize) -> char {
    (b'A' + col as u8) as char
}

fn render_ref(r: &ORef) -> String {
    match r {
        ORef::Range { col, top, bottom } => format!("{c}{top}:{c}{bottom}", c = letter(*col)),
        ORef::Column(col) => format!("{c}:{c}", c = letter(*col)),
    }
}

fn render_crit(c: &OCrit) -> String {
    match c {
        OCrit::Num(op, n) => format!("\"{}{n}\"", op.symbol()),
        OCrit::Text(Cmp::Eq, s) => format!("\"{s}\""),
        OCrit::Text(op, s) => format!("\"{}{s}\"", op.symbol()),
    }
}

pub fn render(e: &OExpr) -> String {
    match e {
        OExpr::Lit(n) if *n < 0 => format!("({n})"),
        OExpr::Lit(n) => n.to_string(),
        OExpr::Cell(col, row) => format!("{}{row}", letter(*col)),
        OExpr::Agg(f, refs) => {
            let name = match f {
                Agg::Sum => "SUM",
                Agg::Average => "AVERAGE",
                Agg::Count => "COUNT",
                Agg::Min => "MIN",
                Agg::Max => "MAX",
            };
            format!("{name}({})", refs.iter().map(render_ref).collect::<Vec<_>>().join(", "))
        }
        OExpr::SumIf(range, crit, sum) => match sum {
            Some(s) => format!("SUMIF({}, {}, {})", render_ref(range), render_crit(crit), render_ref(s)),
            None => format!("SUMIF({}, {})", render_ref(range), render_crit(crit)),
        },
        OExpr::SumIfs(sum, pairs) => {
            let mut parts = vec![render_ref(sum)];
            for (r, c) in pairs {
                parts.push(render_ref(r));
                parts.push(render_crit(c));
            }
            format!("SUMIFS({})", parts.join(", "))
        }
        OExpr::CountIfs(pairs) => {
            let name = if pairs.len() == 1 { "COUNTIF" } else { "COUNTIFS" };
            let parts: Vec<String> = pairs.iter().flat_map(|(r, c)| [render_ref(r), render_crit(c)]).collect();
            format!("{name}({})", parts.join(", "))
        }
        OExpr::Arith(op, a, b) => {
            let sym = match op {
                Arith::Add => "+",
                Arith::Sub => "-",
                Arith::Mul => "*",
                Arith::Div => "/",
            };
            format!("({}{sym}{})", render(a), render(b))
        }
        OExpr::If(op, l, r, t, f) => {
            format!("IF({}{}{}, {}, {})", render(l), op.symbol(), render(r), render(t), render(f))
        }
    }
}

pub fn formula_text(e: &OExpr) -> String {
    format!("={}", render(e))
}

/// Cells a reference covers, row by row.
fn cells(t: &OTable, r: &ORef) -> Vec<OCell> {
    match r {
        ORef::Range { col, top, bottom } => (*top..=*bottom).map(|row| t.at(*col, row)).collect(),
        ORef::Column(col) => t.rows.iter().map(|row| row[*col].clone()).collect(),
    }
}

fn crit_matches(c: &OCrit, cell: &OCell) -> bool {
    match (c, cell) {
        (OCrit::Num(op, n), OCell::Num(x)) => op.holds(x.partial_cmp(&(*n as f64)).expect("finite")),
        (OCrit::Num(op, _), _) => *op == Cmp::Ne,
        (OCrit::Text(op, s), OCell::Text(x)) => op.holds(x.to_lowercase().cmp(&s.to_lowercase())),
        (OCrit::Text(op, _), _) => *op == Cmp::Ne,
    }
}

fn cell_value(cell: OCell) -> OVal {
    match cell {
        OCell::Num(n) => OVal::Num(n),
        OCell::Text(s) => OVal::Text(s),
        OCell::Blank => OVal::Blank,
    }
}

fn as_number(v: &OVal) -> Result<f64, ErrorKind> {
    match v {
        OVal::Num(n) => Ok(*n),
        OVal::Blank => Ok(0.0),
        OVal::Text(_) => Err(ErrorKind::Value),
        OVal::Err(k) => Err(*k),
    }
}

fn finite(x: f64) -> OVal {
    if x.is_finite() {
        OVal::Num(x)
    } else {
        OVal::Err(ErrorKind::Value)
    }
}

/// Spreadsheet ordering restricted to what the generator produces: blanks act
/// as the other side's zero, numbers sort before text.
fn order(a: &OVal, b: &OVal) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a, b) {
        (OVal::Blank, OVal::Blank) => Equal,
        (OVal::Blank, OVal::Num(y)) => 0.0f64.partial_cmp(y).expect("finite"),
        (OVal::Num(x), OVal::Blank) => x.partial_cmp(&0.0).expect("finite"),
        (OVal::Blank, OVal::Text(y)) => "".cmp(y.to_lowercase().as_str()),
        (OVal::Text(x), OVal::Blank) => x.to_lowercase().as_str().cmp(""),
        (OVal::Num(x), OVal::Num(y)) => x.partial_cmp(y).expect("finite"),
        (OVal::Text(x), OVal::Text(y)) => x.to_lowercase().cmp(&y.to_lowercase()),
        (OVal::Num(_), OVal::Text(_)) => Less,
        (OVal::Text(_), OVal::Num(_)) => Greater,
        _ => unreachable!("errors are handled before comparing"),
    }
}

pub fn eval(t: &OTable, e: &OExpr) -> OVal {
    match e {
        OExpr::Lit(n) => OVal::Num(*n as f64),
        OExpr::Cell(col, row) => cell_value(t.at(*col, *row)),
        OExpr::Agg(f, refs) => {
            let nums: Vec<f64> = refs
                .iter()
                .flat_map(|r| cells(t, r))
                .filter_map(|c| match c {
                    OCell::Num(n) => Some(n),
                    _ => None,
                })
                .collect();
            match f {
                Agg::Sum => finite(nums.iter().sum()),
                Agg::Count => OVal::Num(nums.len() as f64),
                Agg::Average if nums.is_empty() => OVal::Err(ErrorKind::Div0),
                Agg::Average => finite(nums.iter().sum::<f64>() / nums.len() as f64),
                Agg::Min => OVal::Num(nums.iter().copied().reduce(f64::min).unwrap_or(0.0)),
                Agg::Max => OVal::Num(nums.iter().copied().reduce(f64::max).unwrap_or(0.0)),
            }
        }
        OExpr::SumIf(range, crit, sum) => {
            let sum = sum.as_ref().unwrap_or(range);
            conditional_sum(t, sum, &[(range.clone(), crit.clone())])
        }
        OExpr::SumIfs(sum, pairs) => conditional_sum(t, sum, pairs),
        OExpr::CountIfs(pairs) => {
            let columns: Vec<Vec<OCell>> = pairs.iter().map(|(r, _)| cells(t, r)).collect();
            let n = (0..columns[0].len())
                .filter(|&i| pairs.iter().zip(&columns).all(|((_, c), col)| crit_matches(c, &col[i])))
                .count();
            OVal::Num(n as f64)
        }
        OExpr::Arith(op, a, b) => {
            let (a, b) = (eval(t, a), eval(t, b));
            let (x, y) = match (as_number(&a), as_number(&b)) {
                (Ok(x), Ok(y)) => (x, y),
                (Err(k), _) | (_, Err(k)) => return OVal::Err(k),
            };
            match op {
                Arith::Add => finite(x + y),
                Arith::Sub => finite(x - y),
                Arith::Mul => finite(x * y),
                Arith::Div if y == 0.0 => OVal::Err(ErrorKind::Div0),
                Arith::Div => finite(x / y),
            }
        }
        OExpr::If(op, l, r, yes, no) => {
            let (l, r) = (eval(t, l), eval(t, r));
            if let OVal::Err(k) = l {
                return OVal::Err(k);
            }
            if let OVal::Err(k) = r {
                return OVal::Err(k);
            }
            if op.holds(order(&l, &r)) {
                eval(t, yes)
            } else {
                eval(t, no)
            }
        }
    }
}

fn conditional_sum(t: &OTable, sum: &ORef, pairs: &[(ORef, OCrit)]) -> OVal {
    let values = cells(t, sum);
    let columns: Vec<Vec<OCell>> = pairs.iter().map(|(r, _)| cells(t, r)).collect();
    let mut total = 0.0;
    for (i, v) in values.iter().enumerate() {
        if pairs.iter().zip(&columns).all(|((_, c), col)| crit_matches(c, &col[i])) {
            if let OCell::Num(n) = v {
                total += n;
            }
        }
    }
    finite(total)
}

/// Same shape for every reference of one call: either all whole columns or all the same rows.
struct Shape {
    whole: bool,
    top: u32,
    bottom: u32,
}

fn gen_shape(rng: &mut TestRng, t: &OTable) -> Shape {
    let last = t.rows.len() as u32 + 1;
    if rng.random_bool(0.25) {
        return Shape { whole: true, top: 0, bottom: 0 };
    }
    // Mostly data rows, sometimes the header or blank rows past the table.
    let top = if rng.random_bool(0.15) { 1 } else { rng.random_range(2..=last) };
    let bottom = if rng.random_bool(0.15) { last + rng.random_range(1..=3) } else { rng.random_range(top.max(2)..=last) };
    Shape { whole: false, top, bottom: bottom.max(top) }
}

fn shaped(shape: &Shape, col: usize) -> ORef {
    if shape.whole {
        ORef::Column(col)
    } else {
        ORef::Range { col, top: shape.top, bottom: shape.bottom }
    }
}

fn numeric_col(rng: &mut TestRng, t: &OTable) -> usize {
    rng.random_range(1..t.width())
}

fn gen_crit_for(rng: &mut TestRng, col: usize) -> OCrit {
    let op = Cmp::ALL[rng.random_range(0..6)];
    if col == 0 {
        let op = if rng.random_bool(0.7) { Cmp::Eq } else { op };
        OCrit::Text(op, ["a", "b", "c", "B"][rng.random_range(0..4)].to_string())
    } else {
        OCrit::Num(op, rng.random_range(-10..40))
    }
}

fn gen_pair(rng: &mut TestRng, t: &OTable, shape: &Shape) -> (ORef, OCrit) {
    let col = rng.random_range(0..t.width());
    (shaped(shape, col), gen_crit_for(rng, col))
}

pub fn gen_expr(rng: &mut TestRng, t: &OTable, depth: u32) -> OExpr {
    let last = t.rows.len() as u32 + 1;
    let choice = if depth == 0 { rng.random_range(0..3) } else { rng.random_range(0..10) };
    match choice {
        0 => OExpr::Lit(rng.random_range(-5..20)),
        1 => OExpr::Cell(numeric_col(rng, t), rng.random_range(2..=last + 1)),
        2 | 3 => {
            let f = [Agg::Sum, Agg::Average, Agg::Count, Agg::Min, Agg::Max][rng.random_range(0..5)];
            let n = rng.random_range(1..=2);
            let refs = (0..n)
                .map(|_| {
                    let shape = gen_shape(rng, t);
                    shaped(&shape, rng.random_range(0..t.width()))
                })
                .collect();
            OExpr::Agg(f, refs)
        }
        4 => {
            let shape = gen_shape(rng, t);
            let (range, crit) = gen_pair(rng, t, &shape);
            let sum = rng.random_bool(0.6).then(|| shaped(&shape, numeric_col(rng, t)));
            OExpr::SumIf(range, crit, sum)
        }
        5 => {
            let shape = gen_shape(rng, t);
            let sum = shaped(&shape, numeric_col(rng, t));
            let n = rng.random_range(1..=3);
            OExpr::SumIfs(sum, (0..n).map(|_| gen_pair(rng, t, &shape)).collect())
        }
        6 => {
            let shape = gen_shape(rng, t);
            let n = rng.random_range(1..=3);
            OExpr::CountIfs((0..n).map(|_| gen_pair(rng, t, &shape)).collect())
        }
        7 | 8 => {
            let op = [Arith::Add, Arith::Sub, Arith::Mul, Arith::Div][rng.random_range(0..4)];
            OExpr::Arith(op, Box::new(gen_expr(rng, t, depth - 1)), Box::new(gen_expr(rng, t, depth - 1)))
        }
        _ => OExpr::If(
            Cmp::ALL[rng.random_range(0..6)],
            Box::new(gen_expr(rng, t, depth - 1)),
            Box::new(gen_expr(rng, t, depth - 1)),
            Box::new(gen_expr(rng, t, depth - 1)),
            Box::new(gen_expr(rng, t, depth - 1)),
        ),
    }
}

pub fn gen_table(rng: &mut TestRng) -> OTable {
    let numeric_columns = rng.random_range(1..=5);
    let n_rows = rng.random_range(1..=10);
    let integer = rng.random_bool(0.5);
    let rows = (0..n_rows)
        .map(|_| {
            let mut row = vec![match rng.random_range(0..5) {
                0 => OCell::Blank,
                i => OCell::Text(["a", "b", "c", "A"][i - 1].to_string()),
            }];
            for _ in 0..numeric_columns {
                row.push(if rng.random_bool(0.15) {
                    OCell::Blank
                } else if integer {
                    OCell::Num(rng.random_range(-20..50) as f64)
                } else {
                    OCell::Num(rng.random_range(-2000..5000) as f64 / 100.0 + 0.001)
                });
            }
            row
        })
        .collect();
    OTable { numeric_columns, rows, integer }
}

pub fn rng_from_seed(seed: [u8; 32]) -> TestRng {
    TestRng::from_seed(RngAlgorithm::ChaCha, &seed)
}

#[derive(Debug, Clone)]
pub struct Case {
    pub table: OTable,
    pub expr: OExpr,
}

pub fn gen_case(seed: [u8; 32]) -> Case {
    let mut rng = rng_from_seed(seed);
    let table = gen_table(&mut rng);
    let expr = gen_expr(&mut rng, &table, 3);
    Case { table, expr }
}

/// Compares an engine value with the oracle: exact for integer tables, 1e-9 relative otherwise.
pub fn agrees(case: &Case, engine: &Value, oracle: &OVal) -> bool {
    match (engine, oracle) {
        (Value::Number(a), OVal::Num(b)) => {
            if case.table.integer {
                a == b
            } else {
                a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
            }
        }
        (Value::Text(a), OVal::Text(b)) => a == b,
        (Value::Empty, OVal::Blank) => true,
        (Value::Error(a), OVal::Err(b)) => a == b,
        _ => false,
    }
}
