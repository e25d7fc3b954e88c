//! Dependency graph over formula cells and topological recalculation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::value::{ErrorKind, Value};
use crate::workbook::{CellContent, Workbook};

use super::ast::Reference;
use super::eval::evaluate;

/// A formula cell: sheet index plus grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub sheet: usize,
    pub column: u32,
    pub row: u32,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    sheet: usize,
    table: usize,
    row: usize,
    column: usize,
}

/// Edges from each formula cell to the formula cells it reads.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    nodes: Vec<CellKey>,
    slots: Vec<Slot>,
    index: BTreeMap<CellKey, usize>,
    edges: Vec<Vec<usize>>,
}

impl DependencyGraph {
    pub fn build(workbook: &Workbook) -> Self {
        let mut g = DependencyGraph::default();
        for (si, sheet) in workbook.sheets().iter().enumerate() {
            for (ti, table) in sheet.tables.iter().enumerate() {
                for (r, row) in table.rows.iter().enumerate() {
                    for (c, cell) in row.cells.iter().enumerate() {
                        if cell.is_formula() {
                            let addr = table.cell_address(r, c);
                            let key = CellKey { sheet: si, column: addr.column, row: addr.row };
                            g.index.insert(key, g.nodes.len());
                            g.nodes.push(key);
                            g.slots.push(Slot { sheet: si, table: ti, row: r, column: c });
                        }
                    }
                }
            }
        }
        g.edges = vec![Vec::new(); g.nodes.len()];
        for n in 0..g.nodes.len() {
            let slot = g.slots[n];
            let sheet = &workbook.sheets()[slot.sheet];
            let CellContent::Formula(f) = &sheet.tables[slot.table].rows[slot.row].cells[slot.column].content else {
                continue;
            };
            let mut deps = Vec::new();
            for r in f.ast.references() {
                let si = match r.sheet() {
                    Some(name) => match workbook.sheet_index(name) {
                        Some(i) => i,
                        None => continue,
                    },
                    None => slot.sheet,
                };
                g.collect_targets(workbook, si, &r, &mut deps);
            }
            deps.sort_unstable();
            deps.dedup();
            g.edges[n] = deps;
        }
        g
    }

    fn collect_targets(&self, workbook: &Workbook, si: usize, r: &Reference, out: &mut Vec<usize>) {
        let lo = CellKey { sheet: si, column: 0, row: 0 };
        let hi = CellKey { sheet: si, column: u32::MAX, row: u32::MAX };
        for (key, &n) in self.index.range(lo..=hi) {
            let hit = match r {
                Reference::Cell(a) => key.column == a.column && key.row == a.row,
                Reference::Range(a, b) => {
                    (a.column..=b.column).contains(&key.column) && (a.row..=b.row).contains(&key.row)
                }
                Reference::Column { first, last, .. } => {
                    let slot = self.slots[n];
                    let table = &workbook.sheets()[si].tables[slot.table];
                    (*first..=*last).contains(&key.column) && table.aggregation_row() != Some(slot.row)
                }
            };
            if hit {
                out.push(n);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dependencies(&self, key: &CellKey) -> Vec<CellKey> {
        self.index
            .get(key)
            .map(|&n| self.edges[n].iter().map(|&d| self.nodes[d]).collect())
            .unwrap_or_default()
    }

    /// Strongly connected components, dependencies before dependents.
    fn components(&self) -> Vec<Vec<usize>> {
        // iterative Tarjan
        const UNSEEN: usize = usize::MAX;
        let n = self.nodes.len();
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut out = Vec::new();
        let mut next = 0;
        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            let mut work: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut i)) = work.last_mut() {
                if let Some(&w) = self.edges[v].get(*i) {
                    *i += 1;
                    if index[w] == UNSEEN {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        work.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
        out
    }
}

/// What a recalculation did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecalcReport {
    /// Cells evaluated, in evaluation order.
    pub evaluated: Vec<CellKey>,
    /// Cells found on a dependency cycle.
    pub cyclic: Vec<CellKey>,
}

/// Re-evaluates every formula cell in dependency order. Cells on a cycle get `#CYCLE!`.
pub fn recalculate(workbook: &mut Workbook) -> RecalcReport {
    let graph = DependencyGraph::build(workbook);
    let mut report = RecalcReport::default();
    for comp in graph.components() {
        let cyclic = comp.len() > 1 || graph.edges[comp[0]].contains(&comp[0]);
        for &n in &comp {
            let slot = graph.slots[n];
            let value = if cyclic {
                report.cyclic.push(graph.nodes[n]);
                Value::Error(ErrorKind::Cycle)
            } else {
                report.evaluated.push(graph.nodes[n]);
                let sheet = &workbook.sheets()[slot.sheet];
                match &sheet.tables[slot.table].rows[slot.row].cells[slot.column].content {
                    CellContent::Formula(f) => evaluate(&f.ast, workbook, &sheet.name),
                    CellContent::Literal(v) => v.clone(),
                }
            };
            workbook.sheets_mut()[slot.sheet].tables[slot.table].rows[slot.row].cells[slot.column].cached = value;
        }
    }
    report.cyclic.sort_unstable();
    report
}
