use thiserror::Error;

/// Errors raised by the numerical routines, the simulators and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    /// A configuration or parameter failed validation.
    #[error("invalid `{key}`: {constraint}")]
    Validation { key: String, constraint: String },

    /// An adaptive quadrature did not reach its tolerance.
    #[error("quadrature failed in {what}: estimated error {error:.3e} exceeds tolerance {tol:.3e} after {evals} evaluations")]
    Quadrature {
        what: &'static str,
        error: f64,
        tol: f64,
        evals: usize,
    },

    /// A covariance matrix could not be factorized.
    #[error("covariance matrix not positive semidefinite ({detail})")]
    NotPsd { detail: String },

    /// Pricing input outside no-arbitrage bounds.
    #[error("price {price} violates the {bound} no-arbitrage bound {value}")]
    Arbitrage {
        price: f64,
        bound: &'static str,
        value: f64,
    },

    #[error("kernel is singular at the origin; integrate it instead of evaluating at t = 0")]
    SingularAtOrigin,

    /// A hard numerical check failed.
    #[error("check failed in {what}: {detail}")]
    CheckFailed { what: &'static str, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn validation(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    /// True for errors caused by user input rather than by numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Domain { .. } | Error::Serde(_) | Error::Arbitrage { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
