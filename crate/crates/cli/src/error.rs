// SPDX-License-Identifier: Apache-2.0

use serde_json::Value;
use strata_walk::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_WINDOW: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// A failed command: exit code, message and an optional JSON payload
/// printed to stderr.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
    pub payload: Option<Value>,
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: msg.into(), payload: None }
    }

    pub fn window(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_WINDOW, message: msg.into(), payload: None }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: msg.into(), payload: None }
    }

    pub fn with_payload(mut self, payload: Value) -> Self {
        self.payload = Some(payload);
        self
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidModel(_)
        | Error::InvalidArgument(_)
        | Error::DimensionUnsupported(_)
        | Error::DriftRefused(_)
        | Error::BelowRange(_) => EXIT_VALIDATION,
        Error::OutOfWindow { .. }
        | Error::WindowTooLarge { .. }
        | Error::Insufficient(_)
        | Error::BruteForceCap { .. }
        | Error::Overflow { .. } => EXIT_WINDOW,
        Error::Io(_) => EXIT_IO,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: exit_code(&e), message: e.to_string(), payload: None }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::io(e.to_string())
    }
}
