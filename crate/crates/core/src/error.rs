use thiserror::Error;

/// Errors raised by the simulator and fit engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CeoError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The linear response matrix is singular at the requested point.
    #[error("singular response matrix for {probe} probe at omega = {omega} rad/s")]
    Singular { probe: String, omega: f64 },

    /// The normalizing off-state reflection vanishes (critically coupled probe).
    #[error("off-state reflection vanishes for {probe} probe at omega = {omega} rad/s; normalized reflection undefined")]
    ZeroReference { probe: String, omega: f64 },

    /// A run or grid parameter is inconsistent (under-resolved grid, sampling violation, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Time-domain integration diverged.
    #[error("time-domain integration diverged at t = {t} s (|component| = {magnitude:e})")]
    Unstable { t: f64, magnitude: f64 },

    /// A per-point error inside a sweep, tagged with the grid index.
    #[error("grid point {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<CeoError>,
    },

    /// Configuration failed validation; every violated invariant is listed.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for CeoError {
    fn from(e: std::io::Error) -> Self {
        CeoError::Io(e.to_string())
    }
}

impl From<csv::Error> for CeoError {
    fn from(e: csv::Error) -> Self {
        CeoError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CeoError>;
