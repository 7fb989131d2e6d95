// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::model::FlowKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field {field} out of range: {value}")]
    FieldRange { field: &'static str, value: u64 },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("flow table has no live entry for {0}")]
    MissingEntry(FlowKey),
    #[error("flow table already holds a live entry for {0}")]
    DuplicateEntry(FlowKey),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("query outside run: {0}")]
    Query(String),
    #[error("reports cannot be compared: {0}")]
    Mismatch(String),
    #[error("failed to parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
