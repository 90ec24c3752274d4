use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("exponent p = {0} must lie in (1, inf)")]
    InvalidExponent(f64),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("set family does not fit the domain: {0}")]
    FamilyMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {point:?} is a declared singular point of the weight")]
    SingularPoint { point: Vec<f64> },

    #[error("point {point:?} lies outside the weight's window")]
    OutsideWindow { point: Vec<f64> },

    #[error("degenerate sample at {point:?}: eigenvalue ratio {ratio:e} below floor")]
    DegenerateSample { point: Vec<f64>, ratio: f64 },

    #[error("near-singular matrix: min eigenvalue {min:e}, max eigenvalue {max:e}")]
    NearSingular { min: f64, max: f64 },

    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown catalog entry '{0}'")]
    UnknownCatalog(String),

    #[error("invalid parameter '{name}': {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("not locally integrable at declared resolution: {0}")]
    NotLocallyIntegrable(String),

    #[error("support escapes the window: {0}")]
    SupportOverflow(String),

    #[error("zero norm: {0}")]
    ZeroNorm(String),

    #[error("tabulated weight file: {0}")]
    Format(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code used in report blocks.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidExponent(_) => "invalid_exponent",
            Error::InvalidDomain(_) => "invalid_domain",
            Error::FamilyMismatch(_) => "family_mismatch",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::SingularPoint { .. } => "singular_point",
            Error::OutsideWindow { .. } => "outside_window",
            Error::DegenerateSample { .. } => "degenerate_sample",
            Error::NearSingular { .. } => "near_singular",
            Error::NotHermitian(_) => "not_hermitian",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::UnknownCatalog(_) => "unknown_catalog",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::NotLocallyIntegrable(_) => "not_locally_integrable",
            Error::SupportOverflow(_) => "support_overflow",
            Error::ZeroNorm(_) => "zero_norm",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
