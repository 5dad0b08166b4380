use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A non-finite value showed up in a numeric pipeline.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Rejection sampling could not hit the interior at a usable rate.
    #[error("degenerate shape for family '{family}' at g = {code:?}: acceptance rate {rate:.3e} after {attempts} attempts")]
    DegenerateShape {
        family: String,
        code: Vec<f64>,
        rate: f64,
        attempts: u64,
    },

    /// A candidate field collapsed below the normalization threshold.
    #[error("degenerate field for mode {mode}: RMS norm {norm:.3e} below threshold")]
    DegenerateField { mode: String, norm: f64 },

    /// The prefix Gram matrix is numerically singular.
    #[error("singular projection prefix: {0}")]
    SingularPrefix(String),

    #[error("unknown shape family '{id}', available: {}", available.join(", "))]
    UnknownFamily { id: String, available: Vec<String> },

    /// Contract violations: bad arguments, invalid configurations.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Malformed input files (OFF meshes, SDF grids, CSV).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("model file error: {0}")]
    Model(String),
}

impl Error {
    /// Wrap a numeric failure with outer loop context (epoch, mode, ...).
    pub fn with_context(self, context: &str) -> Error {
        match self {
            Error::Numeric(msg) => Error::Numeric(format!("{context}: {msg}")),
            other => other,
        }
    }
}
