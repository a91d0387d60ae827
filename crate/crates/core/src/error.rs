use thiserror::Error;

use crate::model::BandViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sampling pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid band: {}", join_violations(.0))]
    InvalidBand(Vec<BandViolation>),

    #[error("invalid design problem: {0}")]
    InvalidProblem(String),

    #[error("branch {branch}: {reason}")]
    SingularSystem { branch: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("input length error: {0}")]
    InputLength(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate measurement: {0}")]
    DegenerateMeasurement(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularSystem { .. } | Error::DegenerateMeasurement(_))
    }
}

fn join_violations(v: &[BandViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
