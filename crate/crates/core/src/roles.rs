//! Structural roles of formula cells: aggregations at the bottom of a column,
//! references to another table's aggregation, aggregations over such references,
//! and row-level transforms. Roles depend only on formulas and table geometry.

use alloc::vec::Vec;

use crate::address::CellAddress;
use crate::formula::{Expr, Reference};
use crate::workbook::{CellContent, CellRole, Table, TablePosition, Workbook, WorkbookError};

/// Role of the cell at `addr` (a grid address on the table's sheet).
pub fn classify_cell_role(
    workbook: &Workbook,
    table: &str,
    addr: &CellAddress,
) -> Result<CellRole, WorkbookError> {
    let (si, ti) = workbook
        .table_location(table)
        .ok_or_else(|| WorkbookError::NoSuchTable(table.into()))?;
    let t = &workbook.sheets()[si].tables[ti];
    match t.locate(addr.column, addr.row) {
        Some(TablePosition::Data { row, column }) => Ok(role_of(workbook, si, ti, row, column)),
        Some(TablePosition::Header { .. }) => Ok(CellRole::Plain),
        None => Err(WorkbookError::AddressOutsideTable(addr.clone(), t.name.clone())),
    }
}

pub(crate) fn refresh_roles(workbook: &mut Workbook) {
    let mut roles = Vec::new();
    for (si, sheet) in workbook.sheets().iter().enumerate() {
        for (ti, table) in sheet.tables.iter().enumerate() {
            for (r, row) in table.rows.iter().enumerate() {
                for c in 0..row.cells.len() {
                    roles.push(role_of(workbook, si, ti, r, c));
                }
            }
        }
    }
    let mut it = roles.into_iter();
    for sheet in workbook.sheets_mut() {
        for table in &mut sheet.tables {
            for row in &mut table.rows {
                for cell in &mut row.cells {
                    cell.role = it.next().unwrap_or(CellRole::Plain);
                }
            }
        }
    }
}

fn formula_at(table: &Table, row: usize, column: usize) -> Option<&Expr> {
    match &table.cell(row, column)?.content {
        CellContent::Formula(f) => Some(&f.ast),
        CellContent::Literal(_) => None,
    }
}

fn on_sheet(workbook: &Workbook, own: usize, r: &Reference) -> Option<usize> {
    match r.sheet() {
        Some(name) => workbook.sheet_index(name),
        None => Some(own),
    }
}

fn role_of(workbook: &Workbook, si: usize, ti: usize, row: usize, column: usize) -> CellRole {
    let local = local_role(workbook, si, ti, row, column);
    if local == CellRole::AggregationCell {
        return local;
    }
    if is_aggregation_reference(workbook, si, ti, row, column) {
        return CellRole::AggregationReferenceCell;
    }
    if is_table_aggregation(workbook, si, ti, row, column) {
        return CellRole::TableAggregationCell;
    }
    local
}

/// Roles decidable from the cell's own table: aggregation, transform, or plain.
fn local_role(workbook: &Workbook, si: usize, ti: usize, row: usize, column: usize) -> CellRole {
    let table = &workbook.sheets()[si].tables[ti];
    let Some(ast) = formula_at(table, row, column) else {
        return CellRole::Plain;
    };
    let refs = ast.references();
    if refs.is_empty() {
        return CellRole::Plain;
    }
    let own_col = table.grid_column(column);
    let own_row = table.grid_row(row);
    let first_data = table.grid_row(0);
    let bottom = table.rect().bottom;

    let in_own_column = |r: &Reference| match r {
        Reference::Range(a, b) => {
            a.column == own_col
                && b.column == own_col
                && a.row >= first_data
                && b.row <= bottom
                && !(a.row..=b.row).contains(&own_row)
        }
        _ => false,
    };
    if ast.contains_call()
        && refs.iter().all(|r| on_sheet(workbook, si, r) == Some(si) && in_own_column(r))
    {
        return CellRole::AggregationCell;
    }

    let rect = table.rect();
    let mut columns: Vec<u32> = Vec::new();
    for r in &refs {
        if on_sheet(workbook, si, r) != Some(si) {
            continue;
        }
        let span = match r {
            Reference::Cell(a) if a.row == own_row => Some((a.column, a.column)),
            Reference::Range(a, b) if a.row == own_row && b.row == own_row => Some((a.column, b.column)),
            _ => None,
        };
        if let Some((lo, hi)) = span {
            for c in lo.max(rect.left)..=hi.min(rect.right) {
                if !columns.contains(&c) {
                    columns.push(c);
                }
            }
        }
    }
    if columns.len() >= 2 {
        CellRole::TransformCell
    } else {
        CellRole::Plain
    }
}

fn is_aggregation_reference(workbook: &Workbook, si: usize, ti: usize, row: usize, column: usize) -> bool {
    let table = &workbook.sheets()[si].tables[ti];
    let Some(Expr::Cell(target)) = formula_at(table, row, column) else {
        return false;
    };
    let Some(tsi) = on_sheet(workbook, si, &Reference::Cell(target.clone())) else {
        return false;
    };
    match workbook.sheets()[tsi].table_at(target.column, target.row) {
        Some((tti, TablePosition::Data { row: r, column: c })) => {
            (tsi, tti) != (si, ti) && local_role(workbook, tsi, tti, r, c) == CellRole::AggregationCell
        }
        _ => false,
    }
}

fn is_table_aggregation(workbook: &Workbook, si: usize, ti: usize, row: usize, column: usize) -> bool {
    let table = &workbook.sheets()[si].tables[ti];
    let Some(ast) = formula_at(table, row, column) else {
        return false;
    };
    if !ast.contains_call() {
        return false;
    }
    let mut seen = 0usize;
    for r in ast.references() {
        let Some(rsi) = on_sheet(workbook, si, &r) else {
            return false;
        };
        let (a, b) = match &r {
            Reference::Cell(a) => (a.clone(), a.clone()),
            Reference::Range(a, b) => (a.clone(), b.clone()),
            Reference::Column { .. } => return false,
        };
        for (tti, t) in workbook.sheets()[rsi].tables.iter().enumerate() {
            for rr in 0..t.rows.len() {
                for cc in 0..t.columns.len() {
                    let addr = t.cell_address(rr, cc);
                    if addr.column < a.column || addr.column > b.column || addr.row < a.row || addr.row > b.row {
                        continue;
                    }
                    if !is_aggregation_reference(workbook, rsi, tti, rr, cc) {
                        return false;
                    }
                    seen += 1;
                }
            }
            let h = t.header_row();
            if (a.row..=b.row).contains(&h) && a.column <= t.rect().right && b.column >= t.rect().left {
                return false;
            }
        }
    }
    seen > 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;
    use crate::workbook::{CellContent, ColumnSpec, Formula, TableKind, TableSpec, ValueType, DEFAULT_SHEET};
    use alloc::vec;

    fn lit(v: f64) -> CellContent {
        CellContent::Literal(Value::Number(v))
    }

    fn f(s: &str) -> CellContent {
        CellContent::Formula(Formula::parse(s).unwrap())
    }

    fn budget() -> Workbook {
        let mut wb = Workbook::new();
        // A1:C10 with the column total in C10
        let mut rows: Vec<Vec<CellContent>> =
            (0..8).map(|i| vec![lit(i as f64 * 10.0), lit(i as f64), f(&alloc::format!("=A{0}-B{0}", i + 2))]).collect();
        rows.push(vec![lit(0.0), lit(0.0), f("=SUM(C2:C9)")]);
        let spec = TableSpec::new(
            "Costs",
            TableKind::Data,
            vec![
                ColumnSpec::new("Estimated", ValueType::Currency),
                ColumnSpec::new("Actual", ValueType::Currency),
                ColumnSpec::new("Over / Under", ValueType::Currency),
            ],
        )
        .with_rows(rows);
        wb.place_table(DEFAULT_SHEET, spec, &CellAddress::new(1, 1)).unwrap();
        wb
    }

    #[test]
    fn aggregation_and_transform() {
        let wb = budget();
        assert_eq!(classify_cell_role(&wb, "Costs", &CellAddress::new(3, 10)), Ok(CellRole::AggregationCell));
        assert_eq!(classify_cell_role(&wb, "Costs", &CellAddress::new(3, 2)), Ok(CellRole::TransformCell));
        assert_eq!(classify_cell_role(&wb, "Costs", &CellAddress::new(1, 2)), Ok(CellRole::Plain));
        assert!(matches!(
            classify_cell_role(&wb, "Costs", &CellAddress::new(9, 9)),
            Err(WorkbookError::AddressOutsideTable(..))
        ));
        let (_, t) = wb.find_table("Costs").unwrap();
        assert_eq!(t.aggregation_row(), Some(8));
    }

    #[test]
    fn reference_and_table_aggregation() {
        let mut wb = budget();
        let spec = TableSpec::new("Summary", TableKind::Insight, vec![ColumnSpec::new("Total", ValueType::Currency)])
            .with_rows(vec![vec![f("=C10")], vec![f("=C10")], vec![f("=SUM(E2:E3)")]]);
        wb.place_table(DEFAULT_SHEET, spec, &CellAddress::new(5, 1)).unwrap();
        assert_eq!(
            classify_cell_role(&wb, "Summary", &CellAddress::new(5, 2)),
            Ok(CellRole::AggregationReferenceCell)
        );
        // SUM over its own column counts as an aggregation first
        assert_eq!(classify_cell_role(&wb, "Summary", &CellAddress::new(5, 4)), Ok(CellRole::AggregationCell));

        let spec = TableSpec::new("Grand", TableKind::Insight, vec![ColumnSpec::new("All", ValueType::Currency)])
            .with_rows(vec![vec![f("=SUM(E2:E3)")]]);
        wb.place_table(DEFAULT_SHEET, spec, &CellAddress::new(7, 1)).unwrap();
        assert_eq!(
            classify_cell_role(&wb, "Grand", &CellAddress::new(7, 2)),
            Ok(CellRole::TableAggregationCell)
        );
    }

    #[test]
    fn classification_is_pure() {
        let wb = budget();
        let a = classify_cell_role(&wb, "Costs", &CellAddress::new(3, 5));
        let b = classify_cell_role(&wb, "Costs", &CellAddress::new(3, 5));
        assert_eq!(a, b);
        let (_, t) = wb.find_table("Costs").unwrap();
        assert_eq!(t.rows[3].cells[2].role, CellRole::TransformCell);
    }
}
