//! Text exports of tables and workbooks: CSV of computed values, Markdown
//! prototypes and the state/v1 document.

use std::fmt;
use std::str::FromStr;

use tabwright_core::codec::serialize_state;
use tabwright_core::markdown::{render_markdown, TableProto};
use tabwright_core::workbook::Table;
use tabwright_core::Workbook;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Markdown,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("unknown export format `{0}` (expected csv, md or json)")]
    Format(String),
    #[error("no table named `{0}`")]
    NoSuchTable(String),
}

impl FromStr for ExportFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            "json" => Ok(Self::Json),
            _ => Err(ExportError::Format(s.into())),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Markdown => "md",
            Self::Json => "json",
        })
    }
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            Self::Csv => "text/csv; charset=utf-8",
            Self::Markdown => "text/markdown; charset=utf-8",
            Self::Json => "application/json",
        }
    }
}

/// RFC 4180 CSV of a table's visible rows: header first, formula cells as their computed values.
pub fn export_csv(table: &Table) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let header: Vec<&str> = table.columns.iter().map(|c| c.header.as_str()).collect();
    write_record(&mut writer, &header);
    for row in table.rows.iter().filter(|r| !r.hidden) {
        let record: Vec<String> = row.cells.iter().map(|c| c.cached.display()).collect();
        write_record(&mut writer, &record);
    }
    let bytes = writer.into_inner().unwrap_or_else(|e| unreachable!("in-memory writer: {e}"));
    String::from_utf8(bytes).unwrap_or_else(|e| unreachable!("fields are UTF-8: {e}"))
}

fn write_record<T: AsRef<[u8]>>(writer: &mut csv::Writer<Vec<u8>>, record: &[T]) {
    writer.write_record(record).unwrap_or_else(|e| unreachable!("in-memory writer: {e}"));
}

/// Markdown prototype of a table: literals as displayed, formulas as source.
pub fn table_proto(table: &Table) -> TableProto {
    TableProto {
        name: table.name.clone(),
        columns: table.columns.iter().map(|c| c.header.clone()).collect(),
        rows: table
            .rows
            .iter()
            .filter(|r| !r.hidden)
            .map(|r| {
                r.cells
                    .iter()
                    .map(|c| c.formula_source().map(String::from).unwrap_or_else(|| c.cached.display()))
                    .collect()
            })
            .collect(),
    }
}

/// Exports one named table, or every table in sheet order separated by a blank line.
///
/// JSON always exports the whole workbook.
pub fn export_workbook(wb: &Workbook, format: ExportFormat, table: Option<&str>) -> Result<String, ExportError> {
    if format == ExportFormat::Json {
        return Ok(serialize_state(wb));
    }
    let tables: Vec<&Table> = match table {
        Some(name) => vec![wb.find_table(name).ok_or_else(|| ExportError::NoSuchTable(name.into()))?.1],
        None => wb.tables().map(|(_, t)| t).collect(),
    };
    let parts: Vec<String> = tables
        .into_iter()
        .map(|t| match format {
            ExportFormat::Csv => export_csv(t),
            _ => render_markdown(&table_proto(t)),
        })
        .collect();
    let separator = if format == ExportFormat::Csv { "\r\n" } else { "\n" };
    Ok(parts.join(separator))
}
