//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(
        "series did not converge within {max_terms} terms (last term magnitude {last_term:e})"
    )]
    SeriesTruncation { max_terms: usize, last_term: f64 },
    #[error("unsupported parameters: {0}")]
    Unsupported(String),
    #[error("coefficient evaluation failed at {point:?}: {reason}")]
    CoefficientEval { point: Vec<f64>, reason: String },
    #[error("boundary classification error: {0}")]
    Classification(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("constants selection failed: violated inequality {0}")]
    ConstantsSelection(String),
    #[error("cylinder construction failed: {0}")]
    CylinderConstruction(String),
    #[error("Hopf violation: inward normal derivative {value:e} is not strictly negative")]
    HopfViolation { value: f64 },
    #[error("certificate failure: {0}")]
    Certificate(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("transform error: {0}")]
    Transform(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
