//! Reading dataset records from disk.

use std::path::Path;

use serde_json::Value;

use crate::dataset::{schema_violations, validate_dataset, DatasetRecord};
use crate::error::{ConcordError, Result};

/// Parses and validates a record. Structural problems (missing, unknown or
/// renamed fields) and semantic ones are both reported as
/// [`ConcordError::Validation`].
pub fn parse_dataset(text: &str) -> Result<DatasetRecord> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConcordError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let structural = schema_violations(&value);
    if !structural.is_empty() {
        return Err(ConcordError::Validation(structural));
    }
    let record: DatasetRecord = serde_json::from_value(value).map_err(|e| ConcordError::Schema {
        field: "record".into(),
        message: e.to_string(),
    })?;
    let semantic = validate_dataset(&record);
    if !semantic.is_empty() {
        return Err(ConcordError::Validation(semantic));
    }
    Ok(record)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetRecord> {
    parse_dataset(&std::fs::read_to_string(path)?)
}
