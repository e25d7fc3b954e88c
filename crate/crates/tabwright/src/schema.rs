//! The published JSON Schema of the `state/v1` document.

pub const STATE_SCHEMA: &str = include_str!("../schema/state-v1.schema.json");
