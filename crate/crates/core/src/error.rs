use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("functions are sampled on different grids")]
    GridMismatch,

    #[error("warping function is not strictly increasing at index {index}")]
    NonMonotone { index: usize },

    #[error("warping function must start at 0 and end at 1 (got {first} and {last})")]
    Endpoints { first: f64, last: f64 },

    #[error("function is not on the unit sphere (norm {norm})")]
    NotUnitNorm { norm: f64 },

    #[error("log map undefined: geodesic distance {distance} reaches pi/2")]
    LogDomain { distance: f64 },

    #[error("phase function outside the invertible domain: exponential map has minimum {min}")]
    PhaseDomain { min: f64 },

    #[error("Karcher mean did not converge: tangent-mean norm {norm} after {iterations} iterations")]
    KarcherNotConverged { norm: f64, iterations: usize },

    #[error("too few observations: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("singular normal equations ({0}); try a larger smoothing parameter")]
    Singular(String),

    #[error("derivative order {order} not available for a degree {degree} spline")]
    DerivativeOrder { order: usize, degree: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("projection of sample {sample} with {m} components failed: {source}")]
    Projection {
        sample: usize,
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("mode at score {z} failed: {source}")]
    Mode {
        z: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Data(String),
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::GridMismatch => "grid_mismatch",
            Error::NonMonotone { .. } => "non_monotone",
            Error::Endpoints { .. } => "endpoints",
            Error::NotUnitNorm { .. } => "not_unit_norm",
            Error::LogDomain { .. } => "log_domain",
            Error::PhaseDomain { .. } => "phase_domain",
            Error::KarcherNotConverged { .. } => "karcher_not_converged",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::Singular(_) => "singular",
            Error::DerivativeOrder { .. } => "derivative_order",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Projection { .. } => "projection",
            Error::Mode { .. } => "mode",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Data(_) => "data",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
