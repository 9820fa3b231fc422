//! Error types shared across the crate.

use thiserror::Error;

/// All errors produced by the library.
///
/// Variants split into two families: domain errors (invalid inputs,
/// infeasible geometry, failed fits) and I/O or parse errors. The CLI maps
/// the former to exit code 1 and the latter to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    /// Diameter ratio outside the supported range `[1, 2.7013...]`.
    #[error("diameter ratio {0} is outside the supported range [1, 2.70130...]")]
    RatioOutOfRange(f64),

    /// A configuration or parameter value violates its documented bounds.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The template needs an explicit axial offset because the contact
    /// equation has no solution at the requested angular offset.
    #[error("dz21 is required at dphi21 = {dphi21}: no contact solution exists there")]
    MissingAxialOffset { dphi21: f64 },

    /// An axial offset was supplied although the contact equation already
    /// fixes it at the requested angular offset.
    #[error("dz21 must not be supplied at dphi21 = {dphi21}: the contact equation fixes it")]
    UnexpectedAxialOffset { dphi21: f64 },

    /// Template construction produced no usable seed (the sweep skips these).
    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    /// Too few sites to fit a number density.
    #[error("insufficient data for the density fit: {0}")]
    InsufficientData(String),

    /// A density or volume-fraction value violates its physical bounds.
    #[error("invalid density estimate: {0}")]
    InvalidDensity(String),

    /// A diameter sweep range is malformed.
    #[error("invalid sweep range: {0}")]
    InvalidRange(String),

    /// Every template in a sweep was invalid.
    #[error("sweep produced no valid template at d = {0}")]
    SweepFailed(f64),

    /// Two curves to compare share no diameter samples.
    #[error("the two curves share no diameter samples")]
    DisjointCurves,

    /// A text input failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error: 2 for I/O and parse failures,
    /// 1 for everything else (domain errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Parse { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
