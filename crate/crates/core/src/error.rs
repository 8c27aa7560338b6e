use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("every weight is zero")]
    AllZeroWeights,
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires d = 1, got d = {0}")]
    DimensionNotOne(usize),
    #[error("problem size {size} exceeds cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("source atom {0} carries no mass")]
    EmptyRow(usize),
    #[error("grid needs at least two strictly increasing points")]
    DegenerateGrid,
    #[error("measures are not in convex order: {0}")]
    ConvexOrderViolated(String),
    #[error("map is not strictly increasing; cannot invert")]
    NonInvertibleMap,
    #[error("flow has no marginal at t = {0}")]
    MissingMarginal(f64),
    #[error("support point {0} lies outside the potential grid")]
    SupportOutsideGrid(f64),
    #[error("map samples are not monotone")]
    NonMonotoneSamples,
    #[error("geodesic endpoints are translates of each other")]
    EndpointsAreTranslates,
    #[error("target measure is a Dirac mass")]
    NuIsDirac,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
