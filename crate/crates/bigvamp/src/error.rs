use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("metric undefined: reference matrix has zero norm")]
    UndefinedMetric,
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("matrix is not positive definite (condition number {condition:.3e})")]
    NotPositiveDefinite { condition: f64 },
    #[error("quadrature did not converge: value {value:.6e}, relative change {rel_change:.3e}")]
    Quadrature { value: f64, rel_change: f64 },
    #[error("unsupported prior: {0}")]
    UnsupportedPrior(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
