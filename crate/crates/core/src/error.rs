use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("point {point:?} is outside the domain of the map (distance {distance:e} to singular set)")]
    Domain { point: Vec<f64>, distance: f64 },
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("singular matrix")]
    SingularMatrix,
    #[error("irregular point {0:?}: Jacobian determinant vanishes")]
    IrregularPoint(Vec<f64>),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("solver did not converge after {paths} paths (bounds [{lower}, {upper}])")]
    Convergence { paths: usize, lower: f64, upper: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
