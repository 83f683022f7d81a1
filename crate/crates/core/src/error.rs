use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid scale {0}: must be positive")]
    InvalidScale(f64),

    #[error("invalid function values: {0}")]
    InvalidFunction(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ball below resolution: no grid node inside ball centered at {center:?} with radius {radius}")]
    BallBelowResolution { center: [f64; 2], radius: f64 },

    #[error("ball family does not cover grid node {0}")]
    FamilyDoesNotCover(usize),

    #[error("Luxemburg bisection did not converge after {iterations} iterations; last bracket [{lo}, {hi}]")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("weight not locally invertible at node {0}")]
    WeightNotInvertible(usize),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid class parameters: {0}")]
    InvalidClass(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid norm bound {0}: must be at least 1")]
    InvalidNormBound(f64),

    #[error("all probes skipped: {0}")]
    NoUsableProbes(String),

    #[error(transparent)]
    Plan(#[from] crate::planner::PlanError),

    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
