// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid environment model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A query needs levels beyond the tabulated window. `needed_scale_log`
    /// is the natural log of the v-scale that could not be resolved.
    #[error("query outside the tabulated window ({what}); enlarge the window")]
    OutOfWindow { what: String, needed_scale_log: f64 },

    #[error("argument below the range of {0}")]
    BelowRange(String),

    #[error("window of {levels} levels exceeds the memory budget of {budget} levels")]
    WindowTooLarge { levels: usize, budget: usize },

    #[error("brute-force evaluation over {indices} indices exceeds the cap of {cap}")]
    BruteForceCap { indices: usize, cap: usize },

    #[error("magnitude e^{lmag} cannot be represented as f64")]
    Overflow { lmag: f64 },

    #[error("Φ(-m,n) is only defined for one horizontal dimension (got d = {0})")]
    DimensionUnsupported(usize),

    #[error("drift criterion refused: {0}")]
    DriftRefused(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn out_of_window(what: impl Into<String>, needed_scale_log: f64) -> Self {
        Error::OutOfWindow { what: what.into(), needed_scale_log }
    }
}

pub(crate) fn out_of_window(what: impl Into<String>, needed_scale_log: f64) -> Error {
    Error::out_of_window(what, needed_scale_log)
}
