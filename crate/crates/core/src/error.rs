//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("non-positive price {price} for {asset} on {date}")]
    NonPositivePrice {
        asset: String,
        date: chrono::NaiveDate,
        price: f64,
    },

    #[error("duplicate date {date} in series {asset}")]
    DuplicateDate {
        asset: String,
        date: chrono::NaiveDate,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("calendar alignment failed: {0}")]
    Alignment(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("optimizer did not converge: {0}")]
    Convergence(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is singular or not positive definite: {0}")]
    SingularMatrix(String),

    #[error("distribution fit failed: {0}")]
    FitFailure(String),

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("tail too small: alpha*n = {alpha_n:.4} < 1")]
    InsufficientTail { alpha_n: f64 },

    #[error("infeasible weight bounds: L={lower}, U={upper}, d={assets}")]
    InfeasibleBounds {
        lower: f64,
        upper: f64,
        assets: usize,
    },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("no equivalent martingale measure: {0}")]
    NoMartingaleMeasure(String),

    #[error("no implied volatility solution: {0}")]
    NoSolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
