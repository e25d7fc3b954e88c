//! Workbook model, formula engine and agent orchestration for conversational
//! spreadsheet authoring. Free of `std`; needs only `alloc`.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod address;
pub mod agent;
pub mod codec;
pub mod formula;
pub mod markdown;
pub mod prompt;
pub mod roles;
pub mod script;
pub mod suggest;
pub mod tools;
pub mod value;
pub mod workbook;

pub use address::{CellAddress, Rect};
pub use value::{ErrorKind, Value};
pub use workbook::Workbook;
