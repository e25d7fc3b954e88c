//! Formula language: syntax tree, parser, criteria, evaluation and recalculation.

pub mod ast;
pub mod criteria;
pub mod eval;
pub mod graph;
pub mod parser;

pub use ast::{BinaryOp, Expr, Function, Reference};
pub use criteria::{Criteria, CriteriaOp};
pub use eval::{evaluate, resolve_column_ref};
pub use graph::{recalculate, CellKey, DependencyGraph, RecalcReport};
pub use parser::{parse_formula, FormulaError};
