use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),
    #[error("domain is empty after rasterization")]
    EmptyDomain,
    #[error("reference point {0:?} is not an interior cell")]
    AnchorNotInterior([f64; 2]),
    #[error("grid of {0} cells exceeds the limit of {1}")]
    ResolutionOverflow(u64, u64),
    #[error("{0} true cells unreachable from the reference point")]
    Unreachable(usize),
    #[error("need at least {needed} increasing resolutions, got {got:?}")]
    Resolutions { needed: usize, got: Vec<usize> },
    #[error("no cube satisfies the Whitney test at this resolution")]
    NoCubes,
    #[error("path property violated: {0}")]
    PathViolation(String),
    #[error("fit refused: only {0} cells under the cutoff (need 30)")]
    FitRefused(usize),
    #[error("right-hand side has nonzero mean {mean:e} (tolerance {tol:e})")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("exponent p = {0} outside the admissible range")]
    BadExponent(f64),
    #[error("discretization failure: {0}")]
    Discretization(String),
    #[error("vanishing set too small: {got} of {total} cells (need half)")]
    VanishingSet { got: usize, total: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
