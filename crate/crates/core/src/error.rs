use std::path::PathBuf;

use thiserror::Error;

use crate::train::WeightMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("target is outside the generator domain: {0}")]
    InfeasibleTarget(String),

    #[error("no sign change found on [{lo}, {hi}] after bracket expansion")]
    NoRoot { lo: f64, hi: f64 },

    #[error("no convergence after {iterations} iterations (best iterate {best}, residual {residual:e})")]
    NotConverged {
        best: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("non-finite value {value} while probing coordinate {coordinate}")]
    Evaluation { coordinate: usize, value: f64 },

    #[error("dimension k = {k} not supported by the grid oracle (max {max})")]
    UnsupportedDimension { k: usize, max: usize },

    #[error("loss evaluation failed on sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line search failed at iteration {iteration} (best objective {best_value})")]
    LineSearch {
        iteration: usize,
        best_value: f64,
        best: Box<WeightMatrix>,
    },

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Manifest(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
