use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("series tolerance {tol:e} not reached within order {max_order}")]
    ToleranceUnreachable { tol: f64, max_order: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("cross-validation mismatch: series {series}, integral {integral} (allowed {allowed:e})")]
    CrossValidation {
        series: f64,
        integral: f64,
        allowed: f64,
    },

    #[error("local exponent fit slope {fitted} disagrees with closed form {expected}")]
    FitMismatch { fitted: f64, expected: f64 },

    #[error("no neighbourhood of the origin with 1 - rho < {0}")]
    EpsSearch(f64),

    #[error("circulant embedding not positive semi-definite: min eigenvalue {min_eig:e} (max {max_eig:e}) after {paddings} padding escalations")]
    NotPsd {
        min_eig: f64,
        max_eig: f64,
        paddings: u32,
    },

    #[error("grid has {points} points, cap is {cap}")]
    GridTooLarge { points: usize, cap: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("variance {0:e} too small to normalise")]
    ZeroVariance(f64),

    #[error("empty report")]
    EmptyReport,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("bad field dump: {0}")]
    Format(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
