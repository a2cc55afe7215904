use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants map onto the validation (exit code 1) and runtime (exit code 2)
/// classes used by the command-line driver; see [`Error::is_validation`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("x = {x} lies on the piece boundary {boundary}")]
    Boundary { x: f64, boundary: f64 },

    #[error(
        "solver did not converge after {iterations} iterations \
         (on-support residual {on_support:.3e}, off-support violation {off_support:.3e})"
    )]
    Convergence {
        iterations: usize,
        on_support: f64,
        off_support: f64,
    },

    #[error("support detection found no node above relative threshold {0}")]
    Threshold(f64),

    #[error("inconsistent solution: {0}")]
    Inconsistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("x = {x} is within {margin} of the excluded neighborhood")]
    Margin { x: f64, margin: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("escape frequency saturated at {value} for N = {n}; fit undefined")]
    Saturation { n: usize, value: f64 },

    #[error("only {effective:.1} effective samples (need at least {required})")]
    Undersample { effective: f64, required: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    /// True for errors caused by bad input rather than by a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::InvalidSpec(_)
                | Error::Config(_)
                | Error::Margin { .. }
                | Error::Precondition(_)
                | Error::Parse { .. }
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
