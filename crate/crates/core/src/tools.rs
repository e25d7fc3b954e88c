//! The eight atomic spreadsheet tools the agent drives: argument schemas,
//! validation against the live workbook, and atomic execution.
//!
//! Validation never mutates. Execution snapshots first and rolls back on any
//! failure, so a failed call leaves content and revision exactly as they were.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use crate::address::CellAddress;
use crate::formula::eval::compare;
use crate::formula::Criteria;
use crate::markdown::{parse_markdown, TableProto};
use crate::value::{parse_iso_date, Value};
use crate::workbook::{
    parse_bool, parse_loose_number, CellContent, ChartSpec, ChartType, ColumnSpec, FilterState, Formula,
    HighlightColor, HighlightRule, HighlightScope, SortState, TableKind, TablePosition, TableSpec, ValueType,
    Workbook, WorkbookError,
};

pub const TOOLS_VERSION: &str = "tools/v1";

/// Named theme colors accepted by `change_table_color`, besides `#RRGGBB`.
pub const TABLE_COLORS: [&str; 8] = ["blue", "green", "orange", "red", "purple", "gray", "yellow", "teal"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToolName {
    ChangeSheetName,
    CreateTable,
    AddChart,
    SortRows,
    FilterRows,
    HighlightCell,
    HighlightRow,
    ChangeTableColor,
}

impl ToolName {
    pub const ALL: [ToolName; 8] = [
        ToolName::ChangeSheetName,
        ToolName::CreateTable,
        ToolName::AddChart,
        ToolName::SortRows,
        ToolName::FilterRows,
        ToolName::HighlightCell,
        ToolName::HighlightRow,
        ToolName::ChangeTableColor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::ChangeSheetName => "change_sheet_name",
            ToolName::CreateTable => "create_table",
            ToolName::AddChart => "add_chart",
            ToolName::SortRows => "sort_rows",
            ToolName::FilterRows => "filter_rows",
            ToolName::HighlightCell => "highlight_cell",
            ToolName::HighlightRow => "highlight_row",
            ToolName::ChangeTableColor => "change_table_color",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    #[serde(default)]
    pub id: String,
    pub name: String,
    #[serde(default = "empty_args")]
    pub args: Json,
}

fn empty_args() -> Json {
    Json::Object(Map::new())
}

impl ToolCall {
    pub fn new(id: impl Into<String>, name: ToolName, args: Json) -> Self {
        Self { id: id.into(), name: name.as_str().into(), args }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolStatus {
    Ok,
    ValidationError,
    ExecutionError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolResult {
    pub call_id: String,
    pub status: ToolStatus,
    pub message: String,
    /// Offending argument for validation errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub state_revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    /// Argument path such as `color` or `rows[1][2]`.
    pub field: String,
    pub message: String,
}

impl ValidationError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

/// A call whose arguments passed validation, resolved against the workbook.
#[derive(Debug, Clone, PartialEq)]
pub enum ToolAction {
    RenameSheet { from: String, to: String },
    CreateTable { sheet: String, spec: TableSpec, anchor: Option<CellAddress> },
    AddChart { chart: ChartSpec },
    SortRows { table: String, column: usize, ascending: bool },
    FilterRows { table: String, column: usize, criteria: Criteria },
    Highlight { table: String, rule: HighlightRule },
    ChangeTableColor { table: String, color: String },
}

fn quoted_list<I: IntoIterator<Item = S>, S: AsRef<str>>(items: I) -> String {
    let parts: Vec<String> = items.into_iter().map(|s| format!("\"{}\"", s.as_ref())).collect();
    if parts.is_empty() {
        "(none)".into()
    } else {
        parts.join(", ")
    }
}

/// Typed access to a call's argument object.
struct Args<'a> {
    map: &'a Map<String, Json>,
}

impl<'a> Args<'a> {
    fn new(args: &'a Json, allowed: &[&str]) -> Result<Self, ValidationError> {
        let map = args
            .as_object()
            .ok_or_else(|| ValidationError::new("args", "arguments must be a JSON object"))?;
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ValidationError::new(
                k.as_str(),
                format!("unknown argument; allowed arguments: {}", quoted_list(allowed)),
            ));
        }
        Ok(Self { map })
    }

    fn get(&self, field: &str) -> Option<&'a Json> {
        self.map.get(field).filter(|v| !v.is_null())
    }

    fn opt_str(&self, field: &str) -> Result<Option<&'a str>, ValidationError> {
        match self.get(field) {
            None => Ok(None),
            Some(Json::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(ValidationError::new(field, "must be a string")),
        }
    }

    fn str(&self, field: &str) -> Result<&'a str, ValidationError> {
        match self.opt_str(field)? {
            Some(s) if !s.trim().is_empty() => Ok(s),
            Some(_) => Err(ValidationError::new(field, "must not be empty")),
            None => Err(ValidationError::new(field, "is required")),
        }
    }

    fn opt_bool(&self, field: &str) -> Result<Option<bool>, ValidationError> {
        match self.get(field) {
            None => Ok(None),
            Some(Json::Bool(b)) => Ok(Some(*b)),
            Some(Json::String(s)) => {
                parse_bool(s).map(Some).ok_or_else(|| ValidationError::new(field, "must be true or false"))
            }
            Some(_) => Err(ValidationError::new(field, "must be true or false")),
        }
    }

    fn criteria(&self, field: &str) -> Result<Criteria, ValidationError> {
        match self.get(field) {
            Some(Json::String(s)) => Ok(Criteria::parse(s)),
            Some(Json::Number(n)) => Ok(Criteria::from_value(&Value::Number(n.as_f64().unwrap_or(0.0)))),
            Some(Json::Bool(b)) => Ok(Criteria::from_value(&Value::Boolean(*b))),
            Some(_) => Err(ValidationError::new(field, "must be a criteria string such as \">=5\" or \"Travel\"")),
            None => Err(ValidationError::new(field, "is required (a criteria string such as \">=5\" or \"Travel\")")),
        }
    }
}

fn existing_table<'w>(wb: &'w Workbook, args: &Args<'_>) -> Result<&'w crate::workbook::Table, ValidationError> {
    let name = args.str("table")?;
    wb.find_table(name).map(|(_, t)| t).ok_or_else(|| {
        ValidationError::new(
            "table",
            format!("no table named \"{name}\"; existing tables: {}", quoted_list(wb.tables().map(|(_, t)| &t.name))),
        )
    })
}

fn existing_column(table: &crate::workbook::Table, field: &str, header: &str) -> Result<usize, ValidationError> {
    table.column_index(header).ok_or_else(|| {
        ValidationError::new(
            field,
            format!(
                "table \"{}\" has no column \"{header}\"; columns: {}",
                table.name,
                quoted_list(table.columns.iter().map(|c| &c.header))
            ),
        )
    })
}

fn highlight_color(args: &Args<'_>) -> Result<HighlightColor, ValidationError> {
    let legal = || quoted_list(HighlightColor::ALL.iter().map(|c| c.as_str()));
    let s = args
        .opt_str("color")?
        .ok_or_else(|| ValidationError::new("color", format!("is required; use one of {}", legal())))?;
    HighlightColor::ALL
        .into_iter()
        .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| ValidationError::new("color", format!("\"{s}\" is not allowed; use one of {}", legal())))
}

/// Checks a call against its schema and the workbook it will run on.
pub fn validate_tool_call(call: &ToolCall, wb: &Workbook) -> Result<ToolAction, ValidationError> {
    let name = ToolName::parse(&call.name).ok_or_else(|| {
        ValidationError::new(
            "name",
            format!("unknown tool \"{}\"; tools: {}", call.name, quoted_list(ToolName::ALL.iter().map(|t| t.as_str()))),
        )
    })?;
    match name {
        ToolName::ChangeSheetName => {
            let args = Args::new(&call.args, &["from", "to"])?;
            let from = args.str("from")?;
            let si = wb.sheet_index(from).ok_or_else(|| {
                ValidationError::new(
                    "from",
                    format!("no sheet named \"{from}\"; sheets: {}", quoted_list(wb.sheets().iter().map(|s| &s.name))),
                )
            })?;
            let to = args.str("to")?;
            if !crate::workbook::valid_name(to) {
                return Err(ValidationError::new(
                    "to",
                    "sheet names must be 1-64 characters without surrounding spaces or any of ' ! [ ] : * ? / \\",
                ));
            }
            if wb.sheet_index(to).is_some_and(|i| i != si) {
                return Err(ValidationError::new("to", format!("a sheet named \"{to}\" already exists")));
            }
            Ok(ToolAction::RenameSheet { from: wb.sheets()[si].name.clone(), to: to.into() })
        }
        ToolName::CreateTable => validate_create_table(&call.args, wb),
        ToolName::AddChart => {
            let args = Args::new(&call.args, &["table", "column", "chartType", "title"])?;
            let table = existing_table(wb, &args)?;
            let legal = || quoted_list(ChartType::ALL.iter().map(|c| c.as_str()));
            let ty = args
                .opt_str("chartType")?
                .ok_or_else(|| ValidationError::new("chartType", format!("is required; use one of {}", legal())))?;
            let chart_type = ChartType::ALL
                .into_iter()
                .find(|c| c.as_str().eq_ignore_ascii_case(ty.trim()))
                .ok_or_else(|| ValidationError::new("chartType", format!("\"{ty}\" is not allowed; use one of {}", legal())))?;
            let col = existing_column(table, "column", args.str("column")?)?;
            let spec = &table.columns[col];
            if !spec.value_type.is_numeric() {
                return Err(ValidationError::new(
                    "column",
                    format!(
                        "charts need a numeric column but \"{}\" holds {}; numeric columns: {}",
                        spec.header,
                        spec.value_type.as_str(),
                        quoted_list(table.columns.iter().filter(|c| c.value_type.is_numeric()).map(|c| &c.header))
                    ),
                ));
            }
            let title = match args.opt_str("title")? {
                Some(t) if !t.trim().is_empty() => t.trim().into(),
                _ => format!("{} by {}", spec.header, table.name),
            };
            Ok(ToolAction::AddChart {
                chart: ChartSpec {
                    chart_type,
                    table_name: table.name.clone(),
                    column_header: spec.header.clone(),
                    title,
                },
            })
        }
        ToolName::SortRows => {
            let args = Args::new(&call.args, &["table", "column", "ascending"])?;
            let table = existing_table(wb, &args)?;
            let column = existing_column(table, "column", args.str("column")?)?;
            let ascending = args.opt_bool("ascending")?.unwrap_or(true);
            Ok(ToolAction::SortRows { table: table.name.clone(), column, ascending })
        }
        ToolName::FilterRows => {
            let args = Args::new(&call.args, &["table", "column", "criteria"])?;
            let table = existing_table(wb, &args)?;
            let column = existing_column(table, "column", args.str("column")?)?;
            let criteria = args.criteria("criteria")?;
            Ok(ToolAction::FilterRows { table: table.name.clone(), column, criteria })
        }
        ToolName::HighlightCell => {
            let args = Args::new(&call.args, &["table", "color", "cell", "column", "criteria"])?;
            let table = existing_table(wb, &args)?;
            let color = highlight_color(&args)?;
            let scope = match args.opt_str("cell")? {
                Some(cell) => {
                    if args.get("column").is_some() || args.get("criteria").is_some() {
                        return Err(ValidationError::new("cell", "give either `cell` or `column` with `criteria`, not both"));
                    }
                    let addr = CellAddress::parse(cell.trim()).map_err(|_| {
                        ValidationError::new("cell", format!("\"{cell}\" is not an A1-style cell address"))
                    })?;
                    if !matches!(table.locate(addr.column, addr.row), Some(TablePosition::Data { .. })) {
                        return Err(ValidationError::new(
                            "cell",
                            format!("{addr} is not a data cell of \"{}\" ({})", table.name, table.rect()),
                        ));
                    }
                    HighlightScope::SingleCell(addr.local())
                }
                None => {
                    let header = args.opt_str("column")?.ok_or_else(|| {
                        ValidationError::new("cell", "is required unless `column` and `criteria` are given")
                    })?;
                    let col = existing_column(table, "column", header)?;
                    HighlightScope::CellsMatching {
                        column: table.columns[col].header.clone(),
                        criteria: args.criteria("criteria")?,
                    }
                }
            };
            Ok(ToolAction::Highlight { table: table.name.clone(), rule: HighlightRule { scope, color } })
        }
        ToolName::HighlightRow => {
            let args = Args::new(&call.args, &["table", "column", "criteria", "color"])?;
            let table = existing_table(wb, &args)?;
            let column = match args.opt_str("column")? {
                Some(h) => Some(table.columns[existing_column(table, "column", h)?].header.clone()),
                None => None,
            };
            let criteria = args.criteria("criteria")?;
            let color = highlight_color(&args)?;
            Ok(ToolAction::Highlight {
                table: table.name.clone(),
                rule: HighlightRule { scope: HighlightScope::RowsMatching { column, criteria }, color },
            })
        }
        ToolName::ChangeTableColor => {
            let args = Args::new(&call.args, &["table", "color"])?;
            let table = existing_table(wb, &args)?;
            let raw = args.str("color")?.trim();
            let color = normalize_table_color(raw).ok_or_else(|| {
                ValidationError::new(
                    "color",
                    format!("\"{raw}\" is not a theme color; use one of {} or a hex code like \"#1F77B4\"", quoted_list(TABLE_COLORS)),
                )
            })?;
            Ok(ToolAction::ChangeTableColor { table: table.name.clone(), color })
        }
    }
}

fn normalize_table_color(raw: &str) -> Option<String> {
    let lower = raw.to_ascii_lowercase();
    if TABLE_COLORS.contains(&lower.as_str()) {
        return Some(lower);
    }
    let hex = lower.strip_prefix('#')?;
    (hex.len() == 6 && hex.bytes().all(|b| b.is_ascii_hexdigit())).then(|| format!("#{hex}"))
}

/// A cell as supplied in `rows`: JSON scalar or text, formulas start with `=`.
enum RawCell {
    Formula(String),
    Text(String),
    Typed(Value),
}

fn raw_cell(v: &Json, field: &str) -> Result<RawCell, ValidationError> {
    Ok(match v {
        Json::Null => RawCell::Typed(Value::Empty),
        Json::Bool(b) => RawCell::Typed(Value::Boolean(*b)),
        Json::Number(n) => match n.as_f64() {
            Some(x) if x.is_finite() => RawCell::Typed(Value::Number(x)),
            _ => return Err(ValidationError::new(field, "number out of range")),
        },
        Json::String(s) if s.trim_start().starts_with('=') => RawCell::Formula(s.trim().into()),
        Json::String(s) => RawCell::Text(s.clone()),
        _ => return Err(ValidationError::new(field, "cells must be strings, numbers, booleans or null")),
    })
}

/// Column type suggested by the literal cells of one column.
fn infer_type(cells: &[&RawCell]) -> ValueType {
    let mut kinds = Vec::new();
    let mut any_formula = false;
    for c in cells {
        let kind = match c {
            RawCell::Formula(_) => {
                any_formula = true;
                continue;
            }
            RawCell::Typed(Value::Empty) => continue,
            RawCell::Text(t) if t.trim().is_empty() => continue,
            RawCell::Typed(Value::Number(_)) => ValueType::Number,
            RawCell::Typed(Value::Boolean(_)) => ValueType::Boolean,
            RawCell::Typed(_) => ValueType::Text,
            RawCell::Text(t) => {
                let t = t.trim();
                if parse_iso_date(t).is_some() {
                    ValueType::Date
                } else if parse_bool(t).is_some() {
                    ValueType::Boolean
                } else if t.ends_with('%') && parse_loose_number(t).is_some() {
                    ValueType::Percent
                } else if t.contains('$') && parse_loose_number(t).is_some() {
                    ValueType::Currency
                } else if parse_loose_number(t).is_some() {
                    ValueType::Number
                } else {
                    ValueType::Text
                }
            }
        };
        kinds.push(kind);
    }
    match kinds.first() {
        None if any_formula => ValueType::Number,
        None => ValueType::Text,
        Some(&first) => {
            if kinds.iter().all(|&k| k == first) {
                first
            } else if kinds.iter().all(|k| k.is_numeric()) {
                if kinds.contains(&ValueType::Currency) {
                    ValueType::Currency
                } else {
                    ValueType::Number
                }
            } else {
                ValueType::Text
            }
        }
    }
}

fn validate_create_table(raw: &Json, wb: &Workbook) -> Result<ToolAction, ValidationError> {
    let args = Args::new(raw, &["sheet", "name", "kind", "columns", "rows", "anchor", "markdown"])?;
    let sheet = match args.opt_str("sheet")? {
        Some(s) => wb.sheet(s).map(|s| s.name.clone()).ok_or_else(|| {
            ValidationError::new(
                "sheet",
                format!("no sheet named \"{s}\"; sheets: {}", quoted_list(wb.sheets().iter().map(|s| &s.name))),
            )
        })?,
        None => wb.first_sheet().name.clone(),
    };
    let kind = match args.opt_str("kind")? {
        None => TableKind::Data,
        Some(k) if k.eq_ignore_ascii_case("data") => TableKind::Data,
        Some(k) if k.eq_ignore_ascii_case("insight") => TableKind::Insight,
        Some(k) => return Err(ValidationError::new("kind", format!("\"{k}\" is not allowed; use \"data\" or \"insight\""))),
    };

    // headers with optional types, and raw cell rows
    let mut headers: Vec<(String, Option<ValueType>)> = Vec::new();
    let mut rows: Vec<Vec<RawCell>> = Vec::new();
    let mut proto_name = None;
    if let Some(md) = args.opt_str("markdown")? {
        if args.get("columns").is_some() || args.get("rows").is_some() {
            return Err(ValidationError::new("markdown", "give either `markdown` or `columns` with `rows`, not both"));
        }
        let TableProto { name, columns, rows: md_rows } =
            parse_markdown(md).map_err(|e| ValidationError::new("markdown", e.to_string()))?;
        headers = columns.into_iter().map(|h| (h, None)).collect();
        rows = md_rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|c| if TableProto::is_formula(&c) { RawCell::Formula(c) } else { RawCell::Text(c) })
                    .collect()
            })
            .collect();
        proto_name = Some(name).filter(|n| !n.is_empty());
    } else {
        let cols = args
            .get("columns")
            .ok_or_else(|| ValidationError::new("columns", "is required (or pass `markdown`)"))?
            .as_array()
            .ok_or_else(|| ValidationError::new("columns", "must be an array"))?;
        for (i, c) in cols.iter().enumerate() {
            let field = format!("columns[{i}]");
            match c {
                Json::String(h) => headers.push((h.clone(), None)),
                Json::Object(o) => {
                    let header = o
                        .get("header")
                        .and_then(Json::as_str)
                        .ok_or_else(|| ValidationError::new(format!("{field}.header"), "is required"))?;
                    let ty = match o.get("type") {
                        None | Some(Json::Null) => None,
                        Some(Json::String(t)) => Some(ValueType::parse(t).ok_or_else(|| {
                            ValidationError::new(
                                format!("{field}.type"),
                                format!(
                                    "\"{t}\" is not allowed; use one of {}",
                                    quoted_list(ValueType::ALL.iter().map(|v| v.as_str()))
                                ),
                            )
                        })?),
                        Some(_) => return Err(ValidationError::new(format!("{field}.type"), "must be a string")),
                    };
                    headers.push((header.into(), ty));
                }
                _ => return Err(ValidationError::new(field, "must be a header string or {header, type}")),
            }
        }
        if let Some(r) = args.get("rows") {
            let r = r.as_array().ok_or_else(|| ValidationError::new("rows", "must be an array of rows"))?;
            for (i, row) in r.iter().enumerate() {
                let cells = row
                    .as_array()
                    .ok_or_else(|| ValidationError::new(format!("rows[{i}]"), "must be an array of cells"))?;
                rows.push(
                    cells
                        .iter()
                        .enumerate()
                        .map(|(j, c)| raw_cell(c, &format!("rows[{i}][{j}]")))
                        .collect::<Result<_, _>>()?,
                );
            }
        }
    }

    let name = match (args.opt_str("name")?, proto_name) {
        (Some(n), _) if !n.trim().is_empty() => n.trim().to_string(),
        (_, Some(n)) => n,
        _ => return Err(ValidationError::new("name", "is required")),
    };
    if !crate::workbook::valid_name(&name) {
        return Err(ValidationError::new("name", "table names must be 1-64 characters without ' ! [ ] : * ? / \\"));
    }
    if wb.find_table(&name).is_some() {
        return Err(ValidationError::new(
            "name",
            format!("a table named \"{name}\" already exists; existing tables: {}", quoted_list(wb.tables().map(|(_, t)| &t.name))),
        ));
    }
    if headers.is_empty() {
        return Err(ValidationError::new("columns", "a table needs at least one column"));
    }
    for (i, (h, _)) in headers.iter().enumerate() {
        if h.trim().is_empty() {
            return Err(ValidationError::new(format!("columns[{i}]"), "headers must not be empty"));
        }
        if headers[..i].iter().any(|(o, _)| o.trim().eq_ignore_ascii_case(h.trim())) {
            return Err(ValidationError::new(format!("columns[{i}]"), format!("duplicate header \"{}\"", h.trim())));
        }
    }
    if let Some(i) = rows.iter().position(|r| r.len() != headers.len()) {
        return Err(ValidationError::new(
            format!("rows[{i}]"),
            format!("has {} cells but the table has {} columns", rows[i].len(), headers.len()),
        ));
    }

    let columns: Vec<ColumnSpec> = headers
        .iter()
        .enumerate()
        .map(|(j, (h, ty))| {
            let ty = ty.unwrap_or_else(|| infer_type(&rows.iter().map(|r| &r[j]).collect::<Vec<_>>()));
            ColumnSpec::new(h.trim(), ty)
        })
        .collect();
    let mut cells = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (j, c) in row.into_iter().enumerate() {
            out.push(match c {
                RawCell::Formula(src) => CellContent::Formula(Formula::parse(&src).map_err(|e| {
                    ValidationError::new(format!("rows[{i}][{j}]"), format!("bad formula {src}: {e}"))
                })?),
                RawCell::Text(t) => CellContent::Literal(columns[j].value_type.coerce(&t)),
                RawCell::Typed(v) => CellContent::Literal(v),
            });
        }
        cells.push(out);
    }

    let anchor = match args.opt_str("anchor")? {
        Some(a) => {
            let addr = CellAddress::parse(a.trim())
                .map_err(|_| ValidationError::new("anchor", format!("\"{a}\" is not an A1-style cell address")))?;
            wb.check_placement(&sheet, &name, &addr, columns.len(), cells.len()).map_err(|e| {
                ValidationError::new("anchor", format!("{e}; omit `anchor` to place the table automatically"))
            })?;
            Some(addr.local())
        }
        None => {
            if wb.auto_anchor(&sheet, columns.len(), cells.len()).is_none() {
                return Err(ValidationError::new("rows", "no free space on the sheet for a table this size"));
            }
            None
        }
    };
    Ok(ToolAction::CreateTable { sheet, spec: TableSpec::new(name, kind, columns).with_rows(cells), anchor })
}

fn missing_table(name: &str) -> WorkbookError {
    WorkbookError::NoSuchTable(name.into())
}

/// Applies a validated action. Callers own snapshot and rollback.
fn apply(action: ToolAction, wb: &mut Workbook) -> Result<String, WorkbookError> {
    match action {
        ToolAction::RenameSheet { from, to } => {
            wb.rename_sheet(&from, &to)?;
            Ok(format!("Renamed sheet \"{from}\" to \"{to}\"."))
        }
        ToolAction::CreateTable { sheet, spec, anchor } => {
            let anchor = match anchor {
                Some(a) => a,
                None => wb
                    .auto_anchor(&sheet, spec.columns.len(), spec.rows.len())
                    .ok_or_else(|| WorkbookError::InvalidTable("no free space on the sheet".into()))?,
            };
            let t = wb.place_table(&sheet, spec, &anchor)?;
            Ok(format!(
                "Created {} table \"{}\" at {} on \"{sheet}\" with {} rows.",
                t.kind,
                t.name,
                t.rect(),
                t.rows.len()
            ))
        }
        ToolAction::AddChart { chart } => {
            let msg = format!(
                "Added a {} chart \"{}\" of \"{}\" in \"{}\".",
                chart.chart_type.as_str(),
                chart.title,
                chart.column_header,
                chart.table_name
            );
            let t = wb.table_mut(&chart.table_name).ok_or_else(|| missing_table(&chart.table_name))?;
            t.charts.push(chart);
            Ok(msg)
        }
        ToolAction::SortRows { table, column, ascending } => {
            let t = wb.table_mut(&table).ok_or_else(|| missing_table(&table))?;
            if column >= t.columns.len() {
                return Err(WorkbookError::NoSuchColumn(table, column.to_string()));
            }
            sort_table(t, column, ascending);
            let header = t.columns[column].header.clone();
            Ok(format!(
                "Sorted \"{table}\" by \"{header}\" {}.",
                if ascending { "ascending" } else { "descending" }
            ))
        }
        ToolAction::FilterRows { table, column, criteria } => {
            let t = wb.table_mut(&table).ok_or_else(|| missing_table(&table))?;
            if column >= t.columns.len() {
                return Err(WorkbookError::NoSuchColumn(table, column.to_string()));
            }
            let header = t.columns[column].header.clone();
            t.filter = Some(FilterState { column, criteria: criteria.clone() });
            wb.reapply_filters();
            let (_, t) = wb.find_table(&table).ok_or_else(|| missing_table(&table))?;
            let hidden = t.rows.iter().filter(|r| r.hidden).count();
            Ok(format!(
                "Filtered \"{table}\" to rows where \"{header}\" matches \"{criteria}\"; {hidden} of {} rows hidden.",
                t.rows.len()
            ))
        }
        ToolAction::Highlight { table, rule } => {
            let t = wb.table_mut(&table).ok_or_else(|| missing_table(&table))?;
            let msg = match &rule.scope {
                HighlightScope::SingleCell(a) => format!("Highlighted {a} in \"{table}\" {}.", rule.color.as_str()),
                HighlightScope::CellsMatching { column, criteria } => format!(
                    "Highlighted cells of \"{column}\" in \"{table}\" matching \"{criteria}\" {}.",
                    rule.color.as_str()
                ),
                HighlightScope::RowsMatching { column: Some(column), criteria } => format!(
                    "Highlighted rows of \"{table}\" where \"{column}\" matches \"{criteria}\" {}.",
                    rule.color.as_str()
                ),
                HighlightScope::RowsMatching { column: None, criteria } => format!(
                    "Highlighted rows of \"{table}\" with any value matching \"{criteria}\" {}.",
                    rule.color.as_str()
                ),
            };
            t.highlights.push(rule);
            Ok(msg)
        }
        ToolAction::ChangeTableColor { table, color } => {
            let t = wb.table_mut(&table).ok_or_else(|| missing_table(&table))?;
            t.style.color = color.clone();
            Ok(format!("Changed the color of \"{table}\" to {color}."))
        }
    }
}

/// Stable sort of data rows by one column. Blanks go last in either direction and
/// the aggregation row stays at the bottom. References a moved row makes to its
/// own row follow it.
fn sort_table(t: &mut crate::workbook::Table, column: usize, ascending: bool) {
    let agg = t.aggregation_row();
    let sortable = agg.unwrap_or(t.rows.len());
    let mut order: Vec<usize> = (0..sortable).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&t.rows[a].cells[column].cached, &t.rows[b].cells[column].cached);
        match (x.is_empty(), y.is_empty()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            _ if ascending => compare(x, y),
            _ => compare(y, x),
        }
    });
    let mut old: Vec<Option<crate::workbook::Row>> = t.rows.drain(..sortable).map(Some).collect();
    let mut moved = Vec::with_capacity(sortable);
    for (new_idx, &old_idx) in order.iter().enumerate() {
        let mut row = old[old_idx].take().unwrap_or_else(|| unreachable!("each row moves once"));
        if new_idx != old_idx {
            let (from, to) = (t.grid_row(old_idx), t.grid_row(new_idx));
            let (left, right) = (t.rect().left, t.rect().right);
            for cell in &mut row.cells {
                if let CellContent::Formula(f) = &mut cell.content {
                    let changed = f.ast.rewrite_addresses(&mut |a| {
                        if a.sheet.is_none() && a.row == from && (left..=right).contains(&a.column) {
                            a.row = to;
                            true
                        } else {
                            false
                        }
                    });
                    if changed {
                        f.reprint();
                    }
                }
            }
        }
        moved.push(row);
    }
    t.rows.splice(0..0, moved);
    t.sort = Some(SortState { column, ascending });
}

/// Validates and runs one call. Only an `Ok` result changes the workbook.
pub fn execute_tool(call: &ToolCall, wb: &mut Workbook) -> ToolResult {
    let revision = wb.revision();
    let result = |status, message: String, field: Option<String>, state_revision| ToolResult {
        call_id: call.id.clone(),
        status,
        message,
        field,
        state_revision,
    };
    let action = match validate_tool_call(call, wb) {
        Ok(a) => a,
        Err(e) => return result(ToolStatus::ValidationError, e.to_string(), Some(e.field), revision),
    };
    let snapshot = wb.snapshot();
    match apply(action, wb) {
        Ok(message) => {
            wb.settle();
            wb.set_revision(revision + 1);
            result(ToolStatus::Ok, message, None, revision + 1)
        }
        Err(e) => {
            wb.rollback(snapshot, revision);
            result(ToolStatus::ExecutionError, e.to_string(), None, revision)
        }
    }
}

fn prop(ty: &str, description: &str) -> Json {
    json!({ "type": ty, "description": description })
}

fn enum_prop(values: &[&str], description: &str) -> Json {
    json!({ "type": "string", "enum": values, "description": description })
}

fn descriptor(name: ToolName, description: &str, properties: Json, required: &[&str]) -> Json {
    json!({
        "name": name.as_str(),
        "description": description,
        "parameters": {
            "type": "object",
            "properties": properties,
            "required": required,
            "additionalProperties": false,
        },
    })
}

/// One descriptor per tool in a fixed order, each with a JSON-schema parameter object.
pub fn tool_schemas() -> Vec<Json> {
    let highlight: Vec<&str> = HighlightColor::ALL.iter().map(|c| c.as_str()).collect();
    let charts: Vec<&str> = ChartType::ALL.iter().map(|c| c.as_str()).collect();
    let types: Vec<&str> = ValueType::ALL.iter().map(|c| c.as_str()).collect();
    let criteria = "criteria such as \">=100\", \"<>Travel\", \"2023-04-01\" or \"Operational\"";
    vec![
        descriptor(
            ToolName::ChangeSheetName,
            "Renames a sheet; formulas that name the sheet keep working.",
            json!({ "from": prop("string", "current sheet name"), "to": prop("string", "new sheet name") }),
            &["from", "to"],
        ),
        descriptor(
            ToolName::CreateTable,
            "Creates a named table from headers and rows of values or =formulas, placed where it does not overlap other tables.",
            json!({
                "sheet": prop("string", "sheet to place the table on; defaults to the first sheet"),
                "name": prop("string", "unique table name"),
                "kind": enum_prop(&["data", "insight"], "data tables hold records; insight tables summarize them"),
                "columns": {
                    "type": "array",
                    "description": "column headers, optionally typed",
                    "items": {
                        "type": "object",
                        "properties": {
                            "header": prop("string", "column header"),
                            "type": enum_prop(&types, "value type; inferred from the cells when omitted"),
                        },
                        "required": ["header"],
                    },
                },
                "rows": {
                    "type": "array",
                    "description": "data rows; each has one cell per column; strings starting with = are formulas",
                    "items": { "type": "array", "items": { "type": ["string", "number", "boolean", "null"] } },
                },
                "anchor": prop("string", "top-left cell such as \"A1\"; omit to place automatically"),
                "markdown": prop("string", "a Markdown pipe table to use instead of columns and rows"),
            }),
            &["name"],
        ),
        descriptor(
            ToolName::AddChart,
            "Adds a chart of one numeric column of a table.",
            json!({
                "table": prop("string", "table name"),
                "column": prop("string", "numeric column header"),
                "chartType": enum_prop(&charts, "chart type"),
                "title": prop("string", "chart title"),
            }),
            &["table", "column", "chartType"],
        ),
        descriptor(
            ToolName::SortRows,
            "Reorders a table's rows by the values in one column; a totals row stays at the bottom.",
            json!({
                "table": prop("string", "table name"),
                "column": prop("string", "column header to sort by"),
                "ascending": prop("boolean", "true for smallest first (default), false for largest first"),
            }),
            &["table", "column"],
        ),
        descriptor(
            ToolName::FilterRows,
            "Hides the rows of a table whose value in one column does not match the criteria; no data is deleted.",
            json!({
                "table": prop("string", "table name"),
                "column": prop("string", "column header to test"),
                "criteria": prop("string", criteria),
            }),
            &["table", "column", "criteria"],
        ),
        descriptor(
            ToolName::HighlightCell,
            "Colors one cell, or every cell of a column that matches the criteria.",
            json!({
                "table": prop("string", "table name"),
                "color": enum_prop(&highlight, "highlight color"),
                "cell": prop("string", "A1-style address of a data cell in the table"),
                "column": prop("string", "column header, used with criteria instead of cell"),
                "criteria": prop("string", criteria),
            }),
            &["table", "color"],
        ),
        descriptor(
            ToolName::HighlightRow,
            "Colors every row of a table with a value matching the criteria, in one column or in any column.",
            json!({
                "table": prop("string", "table name"),
                "column": prop("string", "column header to test; omit to test every column"),
                "criteria": prop("string", criteria),
                "color": enum_prop(&highlight, "highlight color"),
            }),
            &["table", "criteria", "color"],
        ),
        descriptor(
            ToolName::ChangeTableColor,
            "Changes the theme color of a table.",
            json!({
                "table": prop("string", "table name"),
                "color": prop("string", "theme color name or #RRGGBB"),
            }),
            &["table", "color"],
        ),
    ]
}

/// The versioned descriptor document.
pub fn tool_schema_document() -> Json {
    json!({ "version": TOOLS_VERSION, "tools": tool_schemas() })
}
