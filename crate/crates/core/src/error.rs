use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid gamma specification: {0}")]
    InvalidSpec(String),

    #[error("argument {value} is outside the domain: {reason}")]
    Domain { value: f64, reason: &'static str },

    #[error("x = {x} is the singular point a_{index} of gamma")]
    SingularPoint { x: f64, index: usize },

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step h = {h} is inadmissible, the window needs h <= {bound}")]
    InadmissibleStep { h: f64, bound: f64 },

    #[error("t = {t} exceeds the time horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("function evaluated to a non-finite value at x = {x}")]
    NonFinite { x: f64 },

    #[error("quadrature did not converge: error estimate {estimate:e} after {subdivisions} subdivisions")]
    QuadratureNotConverged { estimate: f64, subdivisions: usize },

    #[error("stencil node {k} at x = {x} leaves the domain of f")]
    NodeOutsideDomain { k: usize, x: f64 },

    #[error("ill-conditioned approximation basis (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("partition invariant violated at index {index}: {reason}")]
    PartitionInvariant { index: usize, reason: String },

    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
