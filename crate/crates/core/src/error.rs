use thiserror::Error;

/// Errors raised by fitting, contrast construction, integration and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("group {group} ({label}) has a boundary count ({responders} of {size}); log-odds is not estimable")]
    BoundaryCount {
        group: usize,
        label: String,
        responders: u64,
        size: u64,
    },

    #[error("no information: every group has a boundary count")]
    NoInformation,

    #[error("invalid contrast: {0}")]
    InvalidContrast(String),

    #[error("contrast row `{0}` has zero standard error")]
    ZeroStdErr(String),

    #[error("correlation matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
