//! Standard-library companion to `tabwright-core`: agent backends that talk to
//! the network or the file system, the HTTP session service, the CLI and text
//! exports.

pub mod backend;
pub mod cli;
pub mod export;
pub mod runner;
pub mod schema;
pub mod service;
