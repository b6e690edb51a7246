use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A probability table or distribution failed a structural check.
    #[error("validation error: {0}")]
    Validation(String),

    /// Caller-supplied data has the wrong shape or range.
    #[error("input error: {0}")]
    Input(String),

    #[error("no secrecy: secrecy capacity {secrecy_capacity:e} is not positive")]
    NoSecrecy { secrecy_capacity: f64 },

    #[error(
        "rate exceeds alphabet capacity: {bits} bits requested over {n} uses \
         of a {alphabet}-ary input"
    )]
    RateExceedsAlphabet { bits: usize, n: usize, alphabet: usize },

    #[error("rate exceeds secrecy capacity: {rate} > R_s = {secrecy_capacity}")]
    RateExceedsSecrecy { rate: f64, secrecy_capacity: f64 },

    #[error("blocklength {n} exceeds the configured cap {cap}")]
    BlocklengthCap { n: usize, cap: usize },

    #[error(
        "enumeration cap exceeded: {states} states > cap {cap}; \
         try a smaller blocklength or fewer slots"
    )]
    EnumerationCap { states: u128, cap: u128 },

    /// Internal inconsistency in the chaining state machine.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("insufficient samples: {got} < {needed}")]
    InsufficientSamples { got: usize, needed: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the problem instance rather than by
    /// malformed input or the filesystem.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::NoSecrecy { .. }
                | Error::RateExceedsAlphabet { .. }
                | Error::RateExceedsSecrecy { .. }
                | Error::EnumerationCap { .. }
                | Error::BlocklengthCap { .. }
                | Error::Protocol(_)
                | Error::InsufficientSamples { .. }
                | Error::Validation(_)
        )
    }
}
