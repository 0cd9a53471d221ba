use thiserror::Error;

/// Errors raised by the library.
///
/// Verification failures (a decomposition that breaks an invariant, a
/// kernel whose constant drifts) are not errors; they are reported as data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("resolution {got} too small (need at least {min})")]
    ResolutionTooSmall { got: usize, min: usize },

    #[error("non-finite value {value} at {context}")]
    NonFinite { value: f64, context: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("missing derivative data: {0}")]
    MissingDerivatives(String),

    #[error("quadrature too coarse: node spacing {spacing:.3e} exceeds {limit:.3e}")]
    QuadratureTooCoarse { spacing: f64, limit: f64 },

    #[error("partition of unity denominator {0:.3e} below floor (covering violated)")]
    CoveringViolated(f64),

    #[error("finite-difference step unstable: estimates {coarse:.4e} vs {fine:.4e}")]
    UnstableStep { coarse: f64, fine: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bad .sgrd data: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
