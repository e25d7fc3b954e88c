//! Pipe-table prototypes: the Markdown form tables take in chat before they
//! are created in the workbook.
//!
//! Rendering always emits leading and trailing pipes. Inside cells `\` is written
//! as `\\` and `|` as `\|`; parsing undoes exactly that, so any proto whose cells
//! carry no surrounding whitespace or line breaks survives a round trip.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TableProto {
    /// Rendered as a bold caption line when non-empty.
    pub name: String,
    pub columns: Vec<String>,
    /// Cell text; a leading `=` marks a formula source.
    pub rows: Vec<Vec<String>>,
}

impl TableProto {
    pub fn is_formula(cell: &str) -> bool {
        cell.starts_with('=')
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkdownError {
    #[error("no pipe table found")]
    NoTableFound,
    /// 1-based line number of the offending row.
    #[error("row on line {0} does not match the header's cell count")]
    RaggedRow(usize),
}

fn escape_into(out: &mut String, cell: &str) {
    for ch in cell.trim().chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            '\n' | '\r' => out.push(' '),
            _ => out.push(ch),
        }
    }
}

fn render_row(out: &mut String, cells: &[String]) {
    out.push('|');
    for c in cells {
        out.push(' ');
        escape_into(out, c);
        out.push_str(" |");
    }
    out.push('\n');
}

pub fn render_markdown(proto: &TableProto) -> String {
    let mut out = String::new();
    if !proto.name.trim().is_empty() {
        let _ = write!(out, "**{}**\n\n", proto.name.trim());
    }
    render_row(&mut out, &proto.columns);
    out.push('|');
    for _ in &proto.columns {
        out.push_str(" --- |");
    }
    out.push('\n');
    for row in &proto.rows {
        render_row(&mut out, row);
    }
    out
}

/// Splits a row on unescaped pipes and unescapes each cell. `None` if the line has no pipe.
fn split_row(line: &str) -> Option<Vec<String>> {
    let line = line.trim();
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut pipes = 0;
    let mut chars = line.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => match chars.next() {
                Some(n @ ('\\' | '|')) => cur.push(n),
                Some(n) => {
                    cur.push('\\');
                    cur.push(n);
                }
                None => cur.push('\\'),
            },
            '|' => {
                pipes += 1;
                cells.push(core::mem::take(&mut cur));
            }
            _ => cur.push(ch),
        }
    }
    if pipes == 0 {
        return None;
    }
    cells.push(cur);
    if line.starts_with('|') {
        cells.remove(0);
    }
    // a trailing unescaped pipe leaves an empty final piece
    if ends_with_unescaped_pipe(line) {
        cells.pop();
    }
    Some(cells.into_iter().map(|c| String::from(c.trim())).collect())
}

fn ends_with_unescaped_pipe(line: &str) -> bool {
    let Some(body) = line.strip_suffix('|') else {
        return false;
    };
    body.bytes().rev().take_while(|&b| b == b'\\').count() % 2 == 0
}

fn is_delimiter(cells: &[String]) -> bool {
    !cells.is_empty()
        && cells.iter().all(|c| {
            let c = c.trim();
            let inner = c.strip_prefix(':').unwrap_or(c);
            let inner = inner.strip_suffix(':').unwrap_or(inner);
            !inner.is_empty() && inner.chars().all(|ch| ch == '-')
        })
}

fn caption(line: &str) -> Option<&str> {
    let t = line.trim();
    t.strip_prefix("**")?.strip_suffix("**").filter(|s| !s.is_empty())
}

/// Parses the first pipe table in `text`. Later tables are ignored with a warning.
pub fn parse_markdown(text: &str) -> Result<TableProto, MarkdownError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i + 1 < lines.len() {
        let (Some(header), Some(delim)) = (split_row(lines[i]), split_row(lines[i + 1])) else {
            i += 1;
            continue;
        };
        if !is_delimiter(&delim) || delim.len() != header.len() {
            i += 1;
            continue;
        }
        let name = lines[..i]
            .iter()
            .rev()
            .find(|l| !l.trim().is_empty())
            .and_then(|l| caption(l))
            .unwrap_or("");
        let mut rows = Vec::new();
        let mut j = i + 2;
        while j < lines.len() {
            if lines[j].trim().is_empty() {
                break;
            }
            let Some(cells) = split_row(lines[j]) else { break };
            if cells.len() != header.len() {
                return Err(MarkdownError::RaggedRow(j + 1));
            }
            rows.push(cells);
            j += 1;
        }
        if lines[j..].windows(2).any(|w| {
            split_row(w[0]).is_some() && split_row(w[1]).is_some_and(|d| is_delimiter(&d))
        }) {
            log::warn!("only the first Markdown table is used; later tables are ignored");
        }
        return Ok(TableProto { name: name.into(), columns: header, rows });
    }
    Err(MarkdownError::NoTableFound)
}
