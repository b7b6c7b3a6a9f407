use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// Training produced non-finite values.
    #[error("diverged at epoch {epoch} with learning rate {learning_rate}: {detail}")]
    Divergence {
        epoch: usize,
        learning_rate: f64,
        detail: String,
    },

    /// Iterative fitter ran out of iterations; carries the last iterate.
    #[error("no convergence after {iterations} iterations (last log-likelihood {log_likelihood})")]
    NoConvergence {
        iterations: usize,
        coefficients: Vec<f64>,
        dispersion: f64,
        log_likelihood: f64,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: cannot read {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("model format error: {0}")]
    Format(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable category used by the CLI's one-line error output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidInput(_) => "input",
            Error::Divergence { .. } => "divergence",
            Error::NoConvergence { .. } => "convergence",
            Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Experiment(_) => "experiment",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Re-tag a divergence error with the epoch it happened in.
    pub(crate) fn at_epoch(self, epoch: usize) -> Self {
        match self {
            Error::Divergence {
                learning_rate,
                detail,
                ..
            } => Error::Divergence {
                epoch,
                learning_rate,
                detail,
            },
            other => other,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
