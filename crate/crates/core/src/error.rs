use thiserror::Error;

/// Errors raised by the numerical operators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("structural set is not orthonormal: <v{k}, v{s}> deviates by {deviation:e}")]
    NotOrthonormal { k: usize, s: usize, deviation: f64 },
    #[error("invalid Jacobi exponent {0}: must exceed -1")]
    InvalidExponent(f64),
    #[error("invalid fractional order {0}")]
    InvalidOrder(String),
    #[error("point {x} is not to the right of the base point {a}")]
    DomainError { a: f64, x: f64 },
    #[error("{needed} derivatives required, {given} supplied")]
    MissingDerivative { needed: usize, given: usize },
    #[error("non-finite integrand value at {0:?}")]
    NonFinite([f64; 4]),
    #[error("point {0:?} lies outside the field domain")]
    OutsideDomain([f64; 4]),
    #[error("kernel evaluated at its singularity")]
    SingularPoint,
    #[error("point {0:?} is within the exclusion radius of the boundary")]
    OnBoundary([f64; 4]),
    #[error("RL segment passes within {distance:e} of the kernel singularity")]
    SegmentHitsSingularity { distance: f64 },
    #[error("nested boxes violate strict inclusion at level {0}")]
    NestingViolation(usize),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
