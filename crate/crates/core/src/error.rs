use thiserror::Error;

pub type Result<T> = std::result::Result<T, LdrError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdrError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator A has no potency (A^q = aI); decompression is unavailable")]
    MissingPotency,

    #[error("I - aB^q is singular or ill-conditioned (condition number {cond:e})")]
    SingularTransform { cond: f64 },

    #[error("displacement rank {measured} exceeds the requested bound {bound}")]
    RankExceeded { measured: usize, bound: usize },

    #[error("operator is not diagonalizable (eigendecomposition residual {residual:e})")]
    NotDiagonalizable { residual: f64 },

    #[error("operator pair does not satisfy the column-embedding conditions: {0}")]
    NotConstructible(String),

    #[error("no selector found within the candidate budget (best relative min |D_i| = {best:e})")]
    SelectorNotFound { best: f64 },

    #[error("selector diagonal is numerically singular (min |D_i| = {min:e}, floor {floor:e})")]
    SingularSelector { min: f64, floor: f64 },

    #[error("certificate failed: {what} residual {residual:e} exceeds {tol:e}")]
    Certificate {
        what: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("cache does not match this layer: {0}")]
    StaleCache(String),
}
