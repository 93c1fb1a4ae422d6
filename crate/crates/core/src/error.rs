use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis of dimension {size} exceeds the matrix-size limit {limit}")]
    BasisTooLarge { size: usize, limit: usize },

    #[error("potential frequency {freq:?} is outside the representable range |m| <= {max}")]
    Aliasing { freq: Vec<i64>, max: i64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("band {band} is degenerate at k = {k:?} (gap {gap:.3e} below threshold {threshold:.1e})")]
    Degenerate {
        band: usize,
        k: Vec<f64>,
        gap: f64,
        threshold: f64,
    },

    #[error("spectrum has no eigenvector coefficients")]
    MissingCoefficients,

    #[error("divided difference needs derivative of order {order}, closed forms stop at {cap}")]
    ConfluenceTooDeep { order: usize, cap: usize },

    #[error("node {node} lies outside the contour (must satisfy -1 < node < {x_max})")]
    NodeOutsideContour { node: f64, x_max: f64 },

    #[error("resolvent is near-singular at z = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },

    #[error("fixed-point iteration diverged after {iterations} iterations (last iterate {last})")]
    Divergence { iterations: usize, last: f64 },

    #[error("{what} has imaginary part {imag:.3e} beyond tolerance {tol:.1e}")]
    NonReal { what: String, imag: f64, tol: f64 },

    #[error("fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("root not bracketed in ({lo}, {hi})")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("tail {tail:.3e} exceeds tolerance {tol:.3e}")]
    TailTooLarge { tail: f64, tol: f64 },

    #[error("at k-point {index} ({k:?}): {source}")]
    AtKPoint {
        index: usize,
        k: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("at band tuple {tuple:?}: {source}")]
    AtTuple {
        tuple: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
