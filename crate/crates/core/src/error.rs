use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("region mismatch: {0}")]
    RegionMismatch(String),

    #[error("{what} is not a subset of the enclosing region")]
    NotSubset { what: &'static str },

    #[error("no admissible cover spacing: {0}")]
    NoAdmissibleRho(String),

    #[error("cluster is not connected in the long-range graph")]
    NotConnected,

    #[error("eigensolver failed: {0}")]
    EigenSolver(String),

    #[error("resolvent is singular: energy {energy} is within {gap:e} of the spectrum")]
    SingularResolvent { energy: f64, gap: f64 },

    #[error("function is not finite at eigenvalue {0}")]
    NonFiniteFunction(f64),

    #[error("mass {mass} exceeds the admissible cap {cap}")]
    MassAboveCap { mass: f64, cap: f64 },

    #[error("infeasible exponent system (binding constraint {binding})")]
    Infeasible { binding: String },

    #[error("scale too small: {0}")]
    ScaleTooSmall(String),

    #[error("invalid configuration: field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
