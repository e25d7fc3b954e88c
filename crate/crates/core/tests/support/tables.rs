//! Seeded generators and property checks for the table tools, placement and
//! Markdown prototypes. Each check returns a description of the first violation.

use proptest::prelude::RngExt;
use serde_json::{json, Value as Json};
use tabwright_core::codec::serialize_state;
use tabwright_core::markdown::{parse_markdown, render_markdown, TableProto};
use tabwright_core::tools::{execute_tool, ToolCall, ToolName, ToolStatus};
use tabwright_core::workbook::{
    CellContent, ColumnSpec, Table, TableKind, TableSpec, ValueType, WorkbookError, DEFAULT_SHEET,
};
use tabwright_core::{CellAddress, Rect, Value, Workbook};

use super::oracle::rng_from_seed;

/// A typed cell as generated: `None` is blank.
#[derive(Debug, Clone, PartialEq)]
enum Key {
    Num(Option<i64>),
    Text(Option<String>),
}

impl Key {
    fn json(&self) -> Json {
        match self {
            Key::Num(Some(n)) => json!(n),
            Key::Text(Some(s)) => json!(s),
            _ => Json::Null,
        }
    }
}

/// Random table `T` with an `Id` column (row identity), a numeric `Score`
/// and a text `Label`, both with duplicates and blanks.
fn random_table(rng: &mut proptest::test_runner::TestRng) -> (Workbook, Vec<(i64, Key, Key)>) {
    let n = rng.random_range(1..=12);
    let rows: Vec<(i64, Key, Key)> = (0..n)
        .map(|i| {
            let score = Key::Num((!rng.random_bool(0.15)).then(|| rng.random_range(-3..6)));
            let label = Key::Text((!rng.random_bool(0.15)).then(|| ["apple", "Pear", "fig", "pear"][rng.random_range(0..4)].to_string()));
            (i as i64 + 1, score, label)
        })
        .collect();
    let mut wb = Workbook::new();
    let call = ToolCall::new(
        "t",
        ToolName::CreateTable,
        json!({
            "name": "T",
            "columns": [{"header": "Id", "type": "number"}, {"header": "Score", "type": "number"},
                        {"header": "Label", "type": "text"}],
            "rows": rows.iter().map(|(id, s, l)| json!([id, s.json(), l.json()])).collect::<Vec<_>>(),
        }),
    );
    let result = execute_tool(&call, &mut wb);
    assert_eq!(result.status, ToolStatus::Ok, "{}", result.message);
    (wb, rows)
}

fn table(wb: &Workbook) -> &Table {
    wb.find_table("T").expect("table exists").1
}

fn row_key(t: &Table, r: usize, c: usize) -> Key {
    let v = &t.rows[r].cells[c].cached;
    match (c, v) {
        (2, Value::Text(s)) => Key::Text(Some(s.clone())),
        (2, Value::Empty) => Key::Text(None),
        (_, Value::Number(n)) => Key::Num(Some(*n as i64)),
        (_, Value::Empty) => Key::Num(None),
        other => panic!("unexpected cell {other:?}"),
    }
}

fn id_of(t: &Table, r: usize) -> i64 {
    match t.rows[r].cells[0].cached {
        Value::Number(n) => n as i64,
        ref other => panic!("id cell holds {other:?}"),
    }
}

fn rows_of(t: &Table) -> Vec<(i64, Key, Key)> {
    (0..t.rows.len()).map(|r| (id_of(t, r), row_key(t, r, 1), row_key(t, r, 2))).collect()
}

type Predicate = Box<dyn Fn(&Key) -> bool>;

/// Criteria text and an independent predicate for it.
fn random_criteria(rng: &mut proptest::test_runner::TestRng, numeric: bool) -> (String, Predicate) {
    let ops = ["", "=", "<>", "<", "<=", ">", ">="];
    let op = ops[rng.random_range(0..ops.len())];
    if numeric {
        let n: i64 = rng.random_range(-2..5);
        let text = format!("{op}{n}");
        let op = op.to_string();
        let pred = move |k: &Key| match k {
            Key::Num(Some(x)) => match op.as_str() {
                "" | "=" => *x == n,
                "<>" => *x != n,
                "<" => *x < n,
                "<=" => *x <= n,
                ">" => *x > n,
                _ => *x >= n,
            },
            _ => op == "<>",
        };
        (text, Box::new(pred))
    } else {
        let op = if rng.random_bool(0.5) { op } else { ["", "<>"][rng.random_range(0..2)] };
        let word = ["pear", "APPLE", "fig", "kiwi"][rng.random_range(0..4)].to_string();
        let text = format!("{op}{word}");
        let op = op.to_string();
        let pred = move |k: &Key| match k {
            Key::Text(Some(s)) => {
                let ord = s.to_lowercase().cmp(&word.to_lowercase());
                match op.as_str() {
                    "" | "=" => ord.is_eq(),
                    "<>" => ord.is_ne(),
                    "<" => ord.is_lt(),
                    "<=" => ord.is_le(),
                    ">" => ord.is_gt(),
                    _ => ord.is_ge(),
                }
            }
            _ => op == "<>",
        };
        (text, Box::new(pred))
    }
}

/// Filtering hides exactly the non-matching rows and leaves row data and order untouched.
pub fn check_filter(seed: [u8; 32]) -> Result<(), String> {
    let mut rng = rng_from_seed(seed);
    let (mut wb, rows) = random_table(&mut rng);
    let numeric = rng.random_bool(0.5);
    let (criteria, pred) = random_criteria(&mut rng, numeric);
    let column = if numeric { "Score" } else { "Label" };
    let call = ToolCall::new("f", ToolName::FilterRows, json!({"table": "T", "column": column, "criteria": criteria}));
    let result = execute_tool(&call, &mut wb);
    if result.status != ToolStatus::Ok {
        return Err(format!("filter {criteria:?} failed: {}", result.message));
    }
    let t = table(&wb);
    let after = rows_of(t);
    if after != rows {
        return Err(format!("filter {criteria:?} changed row data: {rows:?} -> {after:?}"));
    }
    for (r, row) in rows.iter().enumerate() {
        let key = if numeric { &row.1 } else { &row.2 };
        if t.rows[r].hidden == pred(key) {
            return Err(format!("filter {criteria:?}: row {r} {key:?} hidden={}", t.rows[r].hidden));
        }
    }
    Ok(())
}

fn key_order(a: &Key, b: &Key) -> Option<std::cmp::Ordering> {
    match (a, b) {
        (Key::Num(Some(x)), Key::Num(Some(y))) => Some(x.cmp(y)),
        (Key::Text(Some(x)), Key::Text(Some(y))) => Some(x.to_lowercase().cmp(&y.to_lowercase())),
        _ => None,
    }
}

/// Sorting yields a permutation of the input rows, ordered by key with blanks
/// last and ties kept in input order.
pub fn check_sort(seed: [u8; 32]) -> Result<(), String> {
    let mut rng = rng_from_seed(seed);
    let (mut wb, rows) = random_table(&mut rng);
    let numeric = rng.random_bool(0.5);
    let ascending = rng.random_bool(0.5);
    let column = if numeric { "Score" } else { "Label" };
    let call = ToolCall::new("s", ToolName::SortRows, json!({"table": "T", "column": column, "ascending": ascending}));
    let result = execute_tool(&call, &mut wb);
    if result.status != ToolStatus::Ok {
        return Err(format!("sort failed: {}", result.message));
    }
    let after = rows_of(table(&wb));
    let mut expected = rows.clone();
    expected.sort_by_key(|r| r.0);
    let mut permuted = after.clone();
    permuted.sort_by_key(|r| r.0);
    if permuted != expected {
        return Err(format!("sort is not a permutation: {rows:?} -> {after:?}"));
    }
    let key = |r: &(i64, Key, Key)| if numeric { r.1.clone() } else { r.2.clone() };
    for w in after.windows(2) {
        let (a, b) = (key(&w[0]), key(&w[1]));
        let in_order = match key_order(&a, &b) {
            Some(ord) => {
                let ord = if ascending { ord } else { ord.reverse() };
                ord.is_lt() || (ord.is_eq() && w[0].0 < w[1].0)
            }
            None => {
                let a_blank = matches!(a, Key::Num(None) | Key::Text(None));
                let b_blank = matches!(b, Key::Num(None) | Key::Text(None));
                (!a_blank && b_blank) || (a_blank && b_blank && w[0].0 < w[1].0)
            }
        };
        if !in_order {
            return Err(format!("rows out of order (ascending={ascending}) on {column}: {after:?}"));
        }
    }
    Ok(())
}

fn rect_of(anchor: &CellAddress, columns: usize, rows: usize) -> Rect {
    Rect {
        left: anchor.column,
        top: anchor.row,
        right: anchor.column + columns as u32 - 1,
        bottom: anchor.row + rows as u32,
    }
}

/// Outcome counts of a run of random placements.
#[derive(Debug, Default, Clone, Copy)]
pub struct PlacementStats {
    pub attempts: usize,
    pub placed: usize,
    pub rejected: usize,
}

/// Random placements on one sheet: accepted tables never intersect, and every
/// rejection is an overlap error that coincides with an actual intersection.
pub fn check_placements(seed: [u8; 32], attempts: usize) -> Result<PlacementStats, String> {
    let mut rng = rng_from_seed(seed);
    let mut wb = Workbook::new();
    let mut placed: Vec<Rect> = Vec::new();
    let mut stats = PlacementStats::default();
    for i in 0..attempts {
        let columns = rng.random_range(1..=4);
        let rows = rng.random_range(0..=5);
        let anchor = CellAddress::new(rng.random_range(1..=16), rng.random_range(1..=40));
        let rect = rect_of(&anchor, columns, rows);
        let spec = TableSpec::new(
            format!("T{i}"),
            TableKind::Data,
            (0..columns).map(|c| ColumnSpec::new(format!("C{c}"), ValueType::Number)).collect(),
        )
        .with_rows(vec![vec![CellContent::Literal(Value::Number(1.0)); columns]; rows]);
        let collides = placed.iter().any(|p| p.intersects(&rect));
        stats.attempts += 1;
        match wb.place_table(DEFAULT_SHEET, spec, &anchor) {
            Ok(t) => {
                if collides {
                    return Err(format!("{} accepted at {} over an existing table", t.name, t.rect()));
                }
                if t.rect() != rect {
                    return Err(format!("{} occupies {} but {} was expected", t.name, t.rect(), rect));
                }
                placed.push(rect);
                stats.placed += 1;
            }
            Err(WorkbookError::Overlap { .. }) if collides => stats.rejected += 1,
            Err(e) => return Err(format!("attempt {i} at {anchor}: unexpected {e:?} (collides={collides})")),
        }
    }
    let tables: Vec<Rect> = wb.first_sheet().tables.iter().map(|t| t.rect()).collect();
    for (i, a) in tables.iter().enumerate() {
        if let Some(b) = tables[i + 1..].iter().find(|b| a.intersects(b)) {
            return Err(format!("{a} intersects {b}"));
        }
    }
    Ok(stats)
}

const CELL_CHARS: &[char] = &['a', 'B', '7', ' ', '|', '\\', '=', '"', '*', '-', ':', '(', ')', ',', '$', '%'];

fn random_cell(rng: &mut proptest::test_runner::TestRng) -> String {
    match rng.random_range(0..5) {
        0 => String::new(),
        1 => format!("=SUM({c}2:{c}{r})", c = ['A', 'B', 'C'][rng.random_range(0..3)], r = rng.random_range(2..9)),
        _ => {
            let len = rng.random_range(1..10);
            let s: String = (0..len).map(|_| CELL_CHARS[rng.random_range(0..CELL_CHARS.len())]).collect();
            s.trim().to_string()
        }
    }
}

pub fn random_proto(seed: [u8; 32]) -> TableProto {
    let mut rng = rng_from_seed(seed);
    let columns = rng.random_range(1..=6);
    let rows = rng.random_range(0..=6);
    TableProto {
        name: if rng.random_bool(0.5) { format!("Table {}", rng.random_range(1..100)) } else { String::new() },
        columns: (0..columns).map(|_| random_cell(&mut rng)).collect(),
        rows: (0..rows).map(|_| (0..columns).map(|_| random_cell(&mut rng)).collect()).collect(),
    }
}

pub fn check_markdown(seed: [u8; 32]) -> Result<(), String> {
    let proto = random_proto(seed);
    let text = render_markdown(&proto);
    match parse_markdown(&text) {
        Ok(back) if back == proto => Ok(()),
        Ok(back) => Err(format!("round trip changed {proto:?} into {back:?} via\n{text}")),
        Err(e) => Err(format!("{e} for\n{text}")),
    }
}

/// Serialization of a workbook before and after a call that must fail.
pub fn failed_call_is_noop(wb: &mut Workbook, call: &ToolCall) -> Result<(), String> {
    let before = serialize_state(wb);
    let revision = wb.revision();
    let result = execute_tool(call, wb);
    if result.status == ToolStatus::Ok {
        return Err(format!("{} unexpectedly succeeded", call.name));
    }
    if serialize_state(wb) != before || wb.revision() != revision {
        return Err(format!("failed {} changed the workbook", call.name));
    }
    Ok(())
}
