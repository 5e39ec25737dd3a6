//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    #[error("system is unstable (spectral abscissa {abscissa:.6e} rad/s >= 0)")]
    Unstable { abscissa: f64 },

    #[error("closed form inapplicable: {reason}")]
    ClosedFormInapplicable { reason: String },

    #[error("second cavity mode is active; this operation requires a single-cavity scenario")]
    SecondCavityActive,

    #[error("coupling vector of cavity {cavity} is zero; dark/bright basis undefined")]
    ZeroCouplingVector { cavity: usize },

    #[error("no finite dark-mode limit; degenerate modes host a dark mode at any coupling")]
    NoFiniteDarkModeLimit,

    #[error("linear solve is singular")]
    SingularSolve,

    #[error(
        "matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.6e} below tolerance)"
    )]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("negative occupation {value:.6e} beyond numerical tolerance")]
    NegativeOccupation { value: f64 },

    #[error("fit did not converge after {iterations} iterations (residual {residual:.6e})")]
    FitDidNotConverge {
        iterations: usize,
        residual: f64,
        best: Box<crate::spectra::LorentzianFit>,
    },

    #[error("insufficient effective samples: need {required}, have {available}")]
    InsufficientSamples { required: usize, available: usize },

    #[error("config error: {message}")]
    Config { message: String },

    #[error("inconsistent derived rule: {message}")]
    InconsistentRule { message: String },

    #[error("sweep failed on {failed} of {total} grid points")]
    SweepFailed { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    fn config(message: impl Into<String>) -> Self {
        Error::Config {
            message: message.into(),
        }
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::config(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::config(e.to_string())
    }
}
