//! The `state/v1` workbook document handed to the agent and served to clients.
//!
//! Serialization is canonical: field order is fixed by the document types, there
//! is no whitespace, numbers appear only as shortest round-trip display strings,
//! and the revision counter is left out. Equal content gives equal bytes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::{CellAddress, Rect};
use crate::formula::Criteria;
use crate::workbook::{
    CellContent, CellRole, ChartSpec, ChartType, ColumnSpec, FilterState, Formula, HighlightColor, HighlightRule,
    HighlightScope, Sheet, SortState, TableKind, TableSpec, ValueType, Workbook, WorkbookError,
};

pub const STATE_VERSION: &str = "state/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StateDocument {
    pub schema_version: String,
    pub sheets: Vec<SheetDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheetDoc {
    pub name: String,
    pub tables: Vec<TableDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TableDoc {
    pub name: String,
    pub kind: String,
    pub range: String,
    pub color: String,
    pub columns: Vec<ColumnDoc>,
    /// Header cells first, then data cells, row-major.
    pub cells: Vec<CellDoc>,
    pub sort: Option<SortDoc>,
    pub filter: Option<FilterDoc>,
    /// Grid rows hidden by the filter.
    pub hidden_rows: Vec<u32>,
    pub charts: Vec<ChartDoc>,
    pub highlights: Vec<HighlightDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnDoc {
    pub header: String,
    #[serde(rename = "type")]
    pub value_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    pub addr: String,
    /// Display text of the literal or cached value; null when blank.
    pub value: Option<String>,
    /// Formula source including `=`; null for literals.
    pub formula: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortDoc {
    pub column: String,
    pub ascending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterDoc {
    pub column: String,
    pub criteria: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDoc {
    #[serde(rename = "type")]
    pub chart_type: String,
    pub column: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighlightDoc {
    /// `cell`, `cells` or `rows`.
    pub scope: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<String>,
    pub color: String,
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed state document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version `{0}`")]
    Version(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

fn role_name(role: CellRole) -> Option<&'static str> {
    match role {
        CellRole::Plain => None,
        CellRole::AggregationCell => Some("aggregation"),
        CellRole::AggregationReferenceCell => Some("aggregation_reference"),
        CellRole::TableAggregationCell => Some("table_aggregation"),
        CellRole::TransformCell => Some("transform"),
        CellRole::ParameterCell => Some("parameter"),
    }
}

pub fn state_document(wb: &Workbook) -> StateDocument {
    let sheets = wb
        .sheets()
        .iter()
        .map(|s| SheetDoc { name: s.name.clone(), tables: s.tables.iter().map(table_doc).collect() })
        .collect();
    StateDocument { schema_version: STATE_VERSION.into(), sheets }
}

fn table_doc(t: &crate::workbook::Table) -> TableDoc {
    let mut cells = Vec::with_capacity((t.rows.len() + 1) * t.columns.len());
    for (c, col) in t.columns.iter().enumerate() {
        cells.push(CellDoc {
            addr: CellAddress::new(t.grid_column(c), t.header_row()).to_string(),
            value: Some(col.header.clone()),
            formula: None,
            role: None,
        });
    }
    for (r, row) in t.rows.iter().enumerate() {
        for (c, cell) in row.cells.iter().enumerate() {
            cells.push(CellDoc {
                addr: t.cell_address(r, c).to_string(),
                value: (!cell.cached.is_empty()).then(|| cell.cached.to_string()),
                formula: cell.formula_source().map(String::from),
                role: role_name(cell.role).map(String::from),
            });
        }
    }
    let header = |i: usize| t.columns[i].header.clone();
    TableDoc {
        name: t.name.clone(),
        kind: t.kind.as_str().into(),
        range: t.rect().to_string(),
        color: t.style.color.clone(),
        columns: t
            .columns
            .iter()
            .map(|c| ColumnDoc { header: c.header.clone(), value_type: c.value_type.as_str().into() })
            .collect(),
        cells,
        sort: t.sort.map(|s| SortDoc { column: header(s.column), ascending: s.ascending }),
        filter: t.filter.as_ref().map(|f| FilterDoc { column: header(f.column), criteria: f.criteria.to_string() }),
        hidden_rows: t
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.hidden)
            .map(|(i, _)| t.grid_row(i))
            .collect(),
        charts: t
            .charts
            .iter()
            .map(|c| ChartDoc {
                chart_type: c.chart_type.as_str().into(),
                column: c.column_header.clone(),
                title: c.title.clone(),
            })
            .collect(),
        highlights: t.highlights.iter().map(highlight_doc).collect(),
    }
}

fn highlight_doc(h: &HighlightRule) -> HighlightDoc {
    let color = h.color.as_str().into();
    match &h.scope {
        HighlightScope::SingleCell(a) => {
            HighlightDoc { scope: "cell".into(), cell: Some(a.to_string()), column: None, criteria: None, color }
        }
        HighlightScope::CellsMatching { column, criteria } => HighlightDoc {
            scope: "cells".into(),
            cell: None,
            column: Some(column.clone()),
            criteria: Some(criteria.to_string()),
            color,
        },
        HighlightScope::RowsMatching { column, criteria } => HighlightDoc {
            scope: "rows".into(),
            cell: None,
            column: column.clone(),
            criteria: Some(criteria.to_string()),
            color,
        },
    }
}

/// Canonical `state/v1` text.
pub fn serialize_state(wb: &Workbook) -> String {
    serde_json::to_string(&state_document(wb)).unwrap_or_else(|e| unreachable!("state documents always serialize: {e}"))
}

fn invalid(msg: String) -> CodecError {
    CodecError::Invalid(msg)
}

fn parse_rect(range: &str) -> Result<Rect, CodecError> {
    let (a, b) = range.split_once(':').ok_or_else(|| invalid(format!("bad range `{range}`")))?;
    let a = CellAddress::parse(a).map_err(|e| invalid(format!("bad range `{range}`: {e}")))?;
    let b = CellAddress::parse(b).map_err(|e| invalid(format!("bad range `{range}`: {e}")))?;
    if b.column < a.column || b.row < a.row {
        return Err(invalid(format!("bad range `{range}`")));
    }
    Ok(Rect { left: a.column, top: a.row, right: b.column, bottom: b.row })
}

/// Loads a workbook from a `state/v1` document. Cached values of formula cells
/// are recomputed; literals are read back through their column's type.
pub fn parse_state(text: &str) -> Result<Workbook, CodecError> {
    let doc: StateDocument = serde_json::from_str(text)?;
    if doc.schema_version != STATE_VERSION {
        return Err(CodecError::Version(doc.schema_version));
    }
    if doc.sheets.is_empty() {
        return Err(invalid("a workbook needs at least one sheet".into()));
    }
    let mut wb = Workbook::from_sheets(Vec::new());
    for s in &doc.sheets {
        if wb.sheets().is_empty() {
            if !crate::workbook::valid_name(&s.name) {
                return Err(WorkbookError::InvalidName(s.name.clone()).into());
            }
            wb.sheets_mut().push(Sheet::new(s.name.clone()));
        } else {
            wb.add_sheet(&s.name)?;
        }
    }
    for s in &doc.sheets {
        for t in &s.tables {
            load_table(&mut wb, &s.name, t)?;
        }
    }
    wb.settle();
    wb.set_revision(0);
    Ok(wb)
}

fn load_table(wb: &mut Workbook, sheet: &str, t: &TableDoc) -> Result<(), CodecError> {
    let rect = parse_rect(&t.range)?;
    let kind = match t.kind.as_str() {
        "data" => TableKind::Data,
        "insight" => TableKind::Insight,
        other => return Err(invalid(format!("table `{}`: unknown kind `{other}`", t.name))),
    };
    let columns: Vec<ColumnSpec> = t
        .columns
        .iter()
        .map(|c| {
            ValueType::parse(&c.value_type)
                .map(|ty| ColumnSpec::new(c.header.clone(), ty))
                .ok_or_else(|| invalid(format!("table `{}`: unknown column type `{}`", t.name, c.value_type)))
        })
        .collect::<Result<_, _>>()?;
    if columns.len() as u32 != rect.right - rect.left + 1 {
        return Err(invalid(format!("table `{}`: range {} does not fit {} columns", t.name, t.range, columns.len())));
    }
    let mut by_addr: BTreeMap<(u32, u32), &CellDoc> = BTreeMap::new();
    for c in &t.cells {
        let a = CellAddress::parse(&c.addr).map_err(|e| invalid(format!("table `{}`: {e}", t.name)))?;
        if !rect.contains(a.column, a.row) {
            return Err(invalid(format!("table `{}`: cell {} lies outside {}", t.name, c.addr, t.range)));
        }
        by_addr.insert((a.row, a.column), c);
    }
    let mut rows = Vec::new();
    for row in rect.top + 1..=rect.bottom {
        let mut cells = Vec::with_capacity(columns.len());
        for (i, col) in (rect.left..=rect.right).enumerate() {
            let doc = by_addr.get(&(row, col));
            let content = match doc.and_then(|d| d.formula.as_deref()) {
                Some(src) => CellContent::Formula(
                    Formula::parse(src).map_err(|e| invalid(format!("table `{}`: {src}: {e}", t.name)))?,
                ),
                None => CellContent::Literal(columns[i].value_type.coerce(doc.and_then(|d| d.value.as_deref()).unwrap_or(""))),
            };
            cells.push(content);
        }
        rows.push(cells);
    }
    let spec = TableSpec::new(t.name.clone(), kind, columns).with_rows(rows);
    wb.place_table(sheet, spec, &CellAddress::new(rect.left, rect.top))?;

    let table = wb.table_mut(&t.name).ok_or_else(|| invalid(format!("table `{}` vanished", t.name)))?;
    let column = |h: &str| {
        table.column_index(h).ok_or_else(|| invalid(format!("table `{}` has no column `{h}`", t.name)))
    };
    let sort = t.sort.as_ref().map(|s| column(&s.column).map(|c| SortState { column: c, ascending: s.ascending }));
    let filter = t
        .filter
        .as_ref()
        .map(|f| column(&f.column).map(|c| FilterState { column: c, criteria: Criteria::parse(&f.criteria) }));
    let mut charts = Vec::new();
    for c in &t.charts {
        let chart_type = ChartType::ALL
            .into_iter()
            .find(|k| k.as_str() == c.chart_type)
            .ok_or_else(|| invalid(format!("unknown chart type `{}`", c.chart_type)))?;
        let col = column(&c.column)?;
        charts.push(ChartSpec {
            chart_type,
            table_name: table.name.clone(),
            column_header: table.columns[col].header.clone(),
            title: c.title.clone(),
        });
    }
    let mut highlights = Vec::new();
    for h in &t.highlights {
        let color = HighlightColor::ALL
            .into_iter()
            .find(|k| k.as_str() == h.color)
            .ok_or_else(|| invalid(format!("unknown highlight color `{}`", h.color)))?;
        let criteria = || {
            h.criteria
                .as_deref()
                .map(Criteria::parse)
                .ok_or_else(|| invalid(format!("highlight in `{}` lacks criteria", t.name)))
        };
        let scope = match (h.scope.as_str(), &h.cell, &h.column) {
            ("cell", Some(cell), _) => HighlightScope::SingleCell(
                CellAddress::parse(cell).map_err(|e| invalid(format!("highlight cell: {e}")))?.local(),
            ),
            ("cells", _, Some(col)) => HighlightScope::CellsMatching { column: col.clone(), criteria: criteria()? },
            ("rows", _, col) => HighlightScope::RowsMatching { column: col.clone(), criteria: criteria()? },
            (other, ..) => return Err(invalid(format!("bad highlight scope `{other}`"))),
        };
        highlights.push(HighlightRule { scope, color });
    }
    table.sort = sort.transpose()?;
    table.filter = filter.transpose()?;
    table.charts = charts;
    table.highlights = highlights;
    table.style.color = t.color.clone();
    Ok(())
}
