//! In-memory spreadsheet model: sheets holding grid-anchored tables.
//!
//! Tables are the only content carrier. A table occupies a rectangle made of a
//! header row at its anchor followed by its data rows; an aggregation row, when
//! present, is simply the last data row and stays inside the rectangle. Charts
//! and highlight rules are metadata and do not occupy grid cells.

use alloc::collections::VecDeque;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::address::{CellAddress, Rect, MAX_COLUMN, MAX_ROW};
use crate::formula::{parse_formula, Criteria, Expr, FormulaError};
use crate::value::{parse_iso_date, parse_number, ErrorKind, Value};

pub const DEFAULT_SHEET: &str = "Sheet1";
pub const UNDO_DEPTH: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkbookError {
    #[error("no sheet named `{0}`")]
    NoSuchSheet(String),
    #[error("no table named `{0}`")]
    NoSuchTable(String),
    #[error("table `{0}` has no column `{1}`")]
    NoSuchColumn(String, String),
    #[error("the name `{0}` is already taken")]
    DuplicateName(String),
    #[error("table `{table}` at {rect} overlaps table `{other}`")]
    Overlap { table: String, rect: Rect, other: String },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("cell {0} is outside table `{1}`")]
    AddressOutsideTable(CellAddress, String),
    #[error("bad formula in {addr}: {source}")]
    Formula { addr: CellAddress, source: FormulaError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableKind {
    Data,
    Insight,
}

impl TableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TableKind::Data => "data",
            TableKind::Insight => "insight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    Text,
    Number,
    Currency,
    Percent,
    Date,
    Boolean,
}

impl ValueType {
    pub const ALL: [ValueType; 6] = [
        ValueType::Text,
        ValueType::Number,
        ValueType::Currency,
        ValueType::Percent,
        ValueType::Date,
        ValueType::Boolean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Text => "text",
            ValueType::Number => "number",
            ValueType::Currency => "currency",
            ValueType::Percent => "percent",
            ValueType::Date => "date",
            ValueType::Boolean => "boolean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str().eq_ignore_ascii_case(s))
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Number | ValueType::Currency | ValueType::Percent)
    }

    /// Literal value for cell text typed into a column of this type. Text that
    /// does not fit the type stays Text; blank text is Empty.
    pub fn coerce(self, text: &str) -> Value {
        let t = text.trim();
        if t.is_empty() {
            return Value::Empty;
        }
        if let Some(kind) = ErrorKind::from_code(t) {
            return Value::Error(kind);
        }
        let typed = match self {
            ValueType::Text => None,
            ValueType::Number | ValueType::Currency | ValueType::Percent => parse_loose_number(t).map(Value::Number),
            ValueType::Date => parse_iso_date(t).map(Value::Date),
            ValueType::Boolean => parse_bool(t).map(Value::Boolean),
        };
        typed.unwrap_or_else(|| Value::Text(text.into()))
    }
}

pub(crate) fn parse_bool(t: &str) -> Option<bool> {
    if t.eq_ignore_ascii_case("true") {
        Some(true)
    } else if t.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

/// Numbers as people type them: `1,200`, `$45.25`, `-$3`, `12%` (as 0.12).
pub(crate) fn parse_loose_number(t: &str) -> Option<f64> {
    if let Some(n) = parse_number(t) {
        return Some(n);
    }
    let (sign, rest) = match t.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, t),
    };
    let rest = rest.strip_prefix('$').unwrap_or(rest);
    let (rest, scale) = match rest.strip_suffix('%') {
        Some(r) => (r, 0.01),
        None => (rest, 1.0),
    };
    let digits: String = rest.chars().filter(|&c| c != ',').collect();
    if digits.starts_with(['-', '+']) {
        return None;
    }
    parse_number(&digits).map(|n| sign * n * scale)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub header: String,
    pub value_type: ValueType,
}

impl ColumnSpec {
    pub fn new(header: impl Into<String>, value_type: ValueType) -> Self {
        Self { header: header.into(), value_type }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellRole {
    Plain,
    AggregationCell,
    AggregationReferenceCell,
    TableAggregationCell,
    TransformCell,
    ParameterCell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    /// Original text including the leading `=`.
    pub source: String,
    pub ast: Expr,
}

impl Formula {
    pub fn parse(source: &str) -> Result<Self, FormulaError> {
        Ok(Self { ast: parse_formula(source)?, source: source.into() })
    }

    /// Rebuilds the source from the AST; used after reference rewrites.
    pub(crate) fn reprint(&mut self) {
        self.source = alloc::format!("={}", self.ast);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellContent {
    Literal(Value),
    Formula(Formula),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub content: CellContent,
    pub cached: Value,
    pub role: CellRole,
}

impl Cell {
    pub fn literal(value: Value) -> Self {
        Self { cached: value.clone(), content: CellContent::Literal(value), role: CellRole::Plain }
    }

    pub fn formula(formula: Formula) -> Self {
        Self { content: CellContent::Formula(formula), cached: Value::Empty, role: CellRole::Plain }
    }

    pub fn formula_source(&self) -> Option<&str> {
        match &self.content {
            CellContent::Formula(f) => Some(&f.source),
            CellContent::Literal(_) => None,
        }
    }

    pub fn is_formula(&self) -> bool {
        matches!(self.content, CellContent::Formula(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub cells: Vec<Cell>,
    /// Only ever true while the table has a filter.
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableStyle {
    pub color: String,
}

impl Default for TableStyle {
    fn default() -> Self {
        Self { color: "blue".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortState {
    pub column: usize,
    pub ascending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub column: usize,
    pub criteria: Criteria,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChartType {
    Line,
    Pie,
    Histogram,
}

impl ChartType {
    pub const ALL: [ChartType; 3] = [ChartType::Line, ChartType::Pie, ChartType::Histogram];

    pub fn as_str(self) -> &'static str {
        match self {
            ChartType::Line => "line",
            ChartType::Pie => "pie",
            ChartType::Histogram => "histogram",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub table_name: String,
    pub column_header: String,
    pub title: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HighlightColor {
    Red,
    Green,
    Yellow,
}

impl HighlightColor {
    pub const ALL: [HighlightColor; 3] =
        [HighlightColor::Red, HighlightColor::Green, HighlightColor::Yellow];

    pub fn as_str(self) -> &'static str {
        match self {
            HighlightColor::Red => "red",
            HighlightColor::Green => "green",
            HighlightColor::Yellow => "yellow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HighlightScope {
    SingleCell(CellAddress),
    /// Every cell of `column` whose value matches.
    CellsMatching { column: String, criteria: Criteria },
    /// Whole rows where the column (or any column, when `None`) matches.
    RowsMatching { column: Option<String>, criteria: Criteria },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighlightRule {
    pub scope: HighlightScope,
    pub color: HighlightColor,
}

/// Where a grid position falls inside a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TablePosition {
    Header { column: usize },
    Data { row: usize, column: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub kind: TableKind,
    /// Top-left corner of the header row, without a sheet qualifier.
    pub anchor: CellAddress,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Row>,
    pub style: TableStyle,
    pub sort: Option<SortState>,
    pub filter: Option<FilterState>,
    pub charts: Vec<ChartSpec>,
    pub highlights: Vec<HighlightRule>,
}

impl Table {
    pub fn rect(&self) -> Rect {
        rect_for(&self.anchor, self.columns.len(), self.rows.len())
    }

    pub fn column_index(&self, header: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.header.eq_ignore_ascii_case(header))
    }

    pub fn header_row(&self) -> u32 {
        self.anchor.row
    }

    /// Grid row of data row `index`.
    pub fn grid_row(&self, index: usize) -> u32 {
        self.anchor.row + 1 + index as u32
    }

    pub fn grid_column(&self, index: usize) -> u32 {
        self.anchor.column + index as u32
    }

    pub fn cell_address(&self, row: usize, column: usize) -> CellAddress {
        CellAddress::new(self.grid_column(column), self.grid_row(row))
    }

    pub fn locate(&self, column: u32, row: u32) -> Option<TablePosition> {
        if !self.rect().contains(column, row) {
            return None;
        }
        let c = (column - self.anchor.column) as usize;
        if row == self.anchor.row {
            Some(TablePosition::Header { column: c })
        } else {
            Some(TablePosition::Data { row: (row - self.anchor.row - 1) as usize, column: c })
        }
    }

    pub fn cell(&self, row: usize, column: usize) -> Option<&Cell> {
        self.rows.get(row)?.cells.get(column)
    }

    /// The last data row, when one of its cells aggregates its own column.
    pub fn aggregation_row(&self) -> Option<usize> {
        let last = self.rows.len().checked_sub(1)?;
        self.rows[last]
            .cells
            .iter()
            .any(|c| c.role == CellRole::AggregationCell)
            .then_some(last)
    }

    fn validate_shape(&self) -> Result<(), WorkbookError> {
        if self.columns.is_empty() {
            return Err(WorkbookError::InvalidTable("a table needs at least one column".into()));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if c.header.trim().is_empty() {
                return Err(WorkbookError::InvalidTable(alloc::format!("column {} has an empty header", i + 1)));
            }
            if self.columns[..i].iter().any(|o| o.header.eq_ignore_ascii_case(&c.header)) {
                return Err(WorkbookError::InvalidTable(alloc::format!("duplicate header `{}`", c.header)));
            }
        }
        if let Some(i) = self.rows.iter().position(|r| r.cells.len() != self.columns.len()) {
            return Err(WorkbookError::InvalidTable(alloc::format!(
                "row {} has {} cells, expected {}",
                i + 1,
                self.rows[i].cells.len(),
                self.columns.len()
            )));
        }
        let r = self.rect();
        if r.right > MAX_COLUMN || r.bottom > MAX_ROW {
            return Err(WorkbookError::InvalidTable("table extends past the grid".into()));
        }
        Ok(())
    }
}

pub(crate) fn rect_for(anchor: &CellAddress, columns: usize, rows: usize) -> Rect {
    Rect {
        left: anchor.column,
        top: anchor.row,
        right: anchor.column + columns.max(1) as u32 - 1,
        bottom: anchor.row + rows as u32,
    }
}

/// What a caller hands to [`Workbook::place_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub name: String,
    pub kind: TableKind,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<CellContent>>,
}

impl TableSpec {
    pub fn new(name: impl Into<String>, kind: TableKind, columns: Vec<ColumnSpec>) -> Self {
        Self { name: name.into(), kind, columns, rows: Vec::new() }
    }

    pub fn with_rows(mut self, rows: Vec<Vec<CellContent>>) -> Self {
        self.rows = rows;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    pub name: String,
    pub tables: Vec<Table>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), tables: Vec::new() }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Bottom-most occupied grid row.
    pub fn max_row(&self) -> u32 {
        self.tables.iter().map(|t| t.rect().bottom).max().unwrap_or(0)
    }

    pub fn table_at(&self, column: u32, row: u32) -> Option<(usize, TablePosition)> {
        self.tables
            .iter()
            .enumerate()
            .find_map(|(i, t)| t.locate(column, row).map(|p| (i, p)))
    }
}

/// A full copy of workbook content, used for undo and tool rollback.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    sheets: Vec<Sheet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workbook {
    sheets: Vec<Sheet>,
    revision: u64,
}

impl Default for Workbook {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn valid_name(name: &str) -> bool {
    !name.trim().is_empty()
        && name.trim() == name
        && name.chars().count() <= 64
        && !name.chars().any(|c| matches!(c, '\'' | '!' | '[' | ']' | ':' | '*' | '?' | '/' | '\\') || c.is_control())
}

impl Workbook {
    /// A workbook with a single empty `Sheet1`.
    pub fn new() -> Self {
        Self { sheets: alloc::vec![Sheet::new(DEFAULT_SHEET)], revision: 0 }
    }

    pub fn from_sheets(sheets: Vec<Sheet>) -> Self {
        let mut wb = Self { sheets, revision: 0 };
        wb.settle();
        wb
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub(crate) fn sheets_mut(&mut self) -> &mut Vec<Sheet> {
        &mut self.sheets
    }

    pub(crate) fn bump_revision(&mut self) {
        self.revision += 1;
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets.iter().find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn sheet_index(&self, name: &str) -> Option<usize> {
        self.sheets.iter().position(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn first_sheet(&self) -> &Sheet {
        &self.sheets[0]
    }

    pub fn tables(&self) -> impl Iterator<Item = (&Sheet, &Table)> {
        self.sheets.iter().flat_map(|s| s.tables.iter().map(move |t| (s, t)))
    }

    pub fn find_table(&self, name: &str) -> Option<(&Sheet, &Table)> {
        self.tables().find(|(_, t)| t.name.eq_ignore_ascii_case(name))
    }

    /// (sheet index, table index)
    pub fn table_location(&self, name: &str) -> Option<(usize, usize)> {
        self.sheets.iter().enumerate().find_map(|(si, s)| {
            s.tables.iter().position(|t| t.name.eq_ignore_ascii_case(name)).map(|ti| (si, ti))
        })
    }

    pub(crate) fn table_mut(&mut self, name: &str) -> Option<&mut Table> {
        let (s, t) = self.table_location(name)?;
        Some(&mut self.sheets[s].tables[t])
    }

    pub fn add_sheet(&mut self, name: &str) -> Result<(), WorkbookError> {
        if !valid_name(name) {
            return Err(WorkbookError::InvalidName(name.into()));
        }
        if self.sheet(name).is_some() {
            return Err(WorkbookError::DuplicateName(name.into()));
        }
        self.sheets.push(Sheet::new(name));
        self.bump_revision();
        Ok(())
    }

    /// Checks that a table of the given size fits at `anchor` without touching other tables.
    pub fn check_placement(
        &self,
        sheet: &str,
        name: &str,
        anchor: &CellAddress,
        columns: usize,
        rows: usize,
    ) -> Result<Rect, WorkbookError> {
        let s = self.sheet(sheet).ok_or_else(|| WorkbookError::NoSuchSheet(sheet.into()))?;
        let rect = rect_for(anchor, columns, rows);
        if let Some(other) = s.tables.iter().find(|t| t.rect().intersects(&rect)) {
            return Err(WorkbookError::Overlap { table: name.into(), rect, other: other.name.clone() });
        }
        Ok(rect)
    }

    /// Materializes a table with its header at `anchor` and rows below it.
    pub fn place_table(
        &mut self,
        sheet: &str,
        spec: TableSpec,
        anchor: &CellAddress,
    ) -> Result<&Table, WorkbookError> {
        let si = self.sheet_index(sheet).ok_or_else(|| WorkbookError::NoSuchSheet(sheet.into()))?;
        if !valid_name(&spec.name) {
            return Err(WorkbookError::InvalidName(spec.name));
        }
        if self.find_table(&spec.name).is_some() {
            return Err(WorkbookError::DuplicateName(spec.name));
        }
        if anchor.column == 0 || anchor.row == 0 {
            return Err(WorkbookError::InvalidTable("anchor must be a valid cell".into()));
        }
        let table = Table {
            name: spec.name,
            kind: spec.kind,
            anchor: anchor.local(),
            columns: spec.columns,
            rows: spec
                .rows
                .into_iter()
                .map(|cells| Row {
                    cells: cells
                        .into_iter()
                        .map(|c| match c {
                            CellContent::Literal(v) => Cell::literal(v),
                            CellContent::Formula(f) => Cell::formula(f),
                        })
                        .collect(),
                    hidden: false,
                })
                .collect(),
            style: TableStyle::default(),
            sort: None,
            filter: None,
            charts: Vec::new(),
            highlights: Vec::new(),
        };
        table.validate_shape()?;
        self.check_placement(sheet, &table.name, anchor, table.columns.len(), table.rows.len())?;
        let ti = self.sheets[si].tables.len();
        self.sheets[si].tables.push(table);
        self.settle();
        self.bump_revision();
        Ok(&self.sheets[si].tables[ti])
    }

    /// First anchor where a table of this size fits with one blank cell of
    /// spacing around existing tables. Columns are scanned left to right and,
    /// within a column, rows top to bottom, so new tables land below earlier ones.
    pub fn auto_anchor(&self, sheet: &str, columns: usize, rows: usize) -> Option<CellAddress> {
        let s = self.sheet(sheet)?;
        let mut cols: Vec<u32> = s.tables.iter().map(|t| t.rect().right + 2).collect();
        cols.push(1);
        cols.sort_unstable();
        cols.dedup();
        let mut tops: Vec<u32> = s.tables.iter().map(|t| t.rect().bottom + 2).collect();
        tops.push(1);
        tops.sort_unstable();
        tops.dedup();
        for &c in &cols {
            for &r in &tops {
                let rect = rect_for(&CellAddress::new(c, r), columns, rows);
                if rect.right > MAX_COLUMN || rect.bottom > MAX_ROW {
                    continue;
                }
                if s.tables.iter().all(|t| !t.rect().expanded(1).intersects(&rect)) {
                    return Some(CellAddress::new(c, r));
                }
            }
        }
        None
    }

    /// Renames a sheet and rewrites formulas that name it explicitly.
    pub fn rename_sheet(&mut self, from: &str, to: &str) -> Result<(), WorkbookError> {
        let si = self.sheet_index(from).ok_or_else(|| WorkbookError::NoSuchSheet(from.into()))?;
        if !valid_name(to) {
            return Err(WorkbookError::InvalidName(to.into()));
        }
        if self.sheet_index(to).is_some_and(|i| i != si) {
            return Err(WorkbookError::DuplicateName(to.into()));
        }
        let old = core::mem::replace(&mut self.sheets[si].name, to.into());
        for sheet in &mut self.sheets {
            for table in &mut sheet.tables {
                for row in &mut table.rows {
                    for cell in &mut row.cells {
                        if let CellContent::Formula(f) = &mut cell.content {
                            let changed = f.ast.rewrite_sheets(&mut |s| {
                                if s.eq_ignore_ascii_case(&old) {
                                    *s = to.to_string();
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
            }
        }
        self.settle();
        self.bump_revision();
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { sheets: self.sheets.clone() }
    }

    /// Restores content from `snapshot`. The revision still moves forward.
    pub fn restore(&mut self, snapshot: Snapshot) {
        self.sheets = snapshot.sheets;
        self.bump_revision();
    }

    /// Restores content and revision exactly, as if the failed change never happened.
    pub(crate) fn rollback(&mut self, snapshot: Snapshot, revision: u64) {
        self.sheets = snapshot.sheets;
        self.revision = revision;
    }

    pub(crate) fn set_revision(&mut self, revision: u64) {
        self.revision = revision;
    }

    /// Value shown at a grid position: header text, cached cell value, or empty.
    pub fn value_at(&self, sheet: usize, column: u32, row: u32) -> Value {
        let s = &self.sheets[sheet];
        match s.table_at(column, row) {
            Some((ti, TablePosition::Header { column })) => {
                Value::Text(s.tables[ti].columns[column].header.clone())
            }
            Some((ti, TablePosition::Data { row, column })) => {
                s.tables[ti].rows[row].cells[column].cached.clone()
            }
            None => Value::Empty,
        }
    }

    /// Recomputes derived state: cell roles, cached formula values, and filter visibility.
    pub fn settle(&mut self) {
        crate::roles::refresh_roles(self);
        crate::formula::recalculate(self);
        self.reapply_filters();
    }

    pub(crate) fn reapply_filters(&mut self) {
        for sheet in &mut self.sheets {
            for table in &mut sheet.tables {
                let agg = table.aggregation_row();
                match &table.filter {
                    Some(f) => {
                        let (col, crit) = (f.column, f.criteria.clone());
                        for (i, row) in table.rows.iter_mut().enumerate() {
                            row.hidden = Some(i) != agg && !crit.matches(&row.cells[col].cached);
                        }
                    }
                    None => table.rows.iter_mut().for_each(|r| r.hidden = false),
                }
            }
        }
    }
}

/// Bounded stack of snapshots; pushing past capacity drops the oldest.
#[derive(Debug, Clone)]
pub struct UndoStack {
    depth: usize,
    items: VecDeque<Snapshot>,
}

impl Default for UndoStack {
    fn default() -> Self {
        Self::with_depth(UNDO_DEPTH)
    }
}

impl UndoStack {
    pub fn with_depth(depth: usize) -> Self {
        Self { depth, items: VecDeque::new() }
    }

    pub fn push(&mut self, snapshot: Snapshot) {
        if self.depth == 0 {
            return;
        }
        if self.items.len() == self.depth {
            self.items.pop_front();
        }
        self.items.push_back(snapshot);
    }

    pub fn pop(&mut self) -> Option<Snapshot> {
        self.items.pop_back()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn oldest(&self) -> Option<&Snapshot> {
        self.items.front()
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
