use thiserror::Error;

/// Errors produced by the spectrum, calibration and mechanism routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("target {target} is not bracketed by f(lo) = {f_lo} and f(hi) = {f_hi}")]
    BracketError { target: f64, f_lo: f64, f_hi: f64 },

    #[error("numerical evaluation did not converge: {0}")]
    NonConvergence(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (eigenvalue floor violated)")]
    NotSpd,

    #[error("matrix does not have full column rank")]
    RankDeficient,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("invalid quadratic-form weights: every weight must be < 1 (got {0})")]
    InvalidWeights(f64),

    #[error("invalid leverage pair (q = {q}, p = {p}): need 0 <= p <= q < 1")]
    InvalidLeverage { q: f64, p: f64 },

    #[error("spectrum is not monotone along the calibration path: delta({lo}) = {delta_lo} > delta({hi}) = {delta_hi}")]
    MonotonicityViolation {
        lo: f64,
        hi: f64,
        delta_lo: f64,
        delta_hi: f64,
    },

    #[error("row {row} has norm {norm} exceeding the universe bound l = {bound}")]
    NormViolation { row: usize, norm: f64, bound: f64 },

    #[error("database is not a member of the domain set")]
    NotInDomain,

    #[error("sketched system stayed rank deficient after {0} attempts")]
    SketchRankDeficient(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("enumeration too large: {0} candidates")]
    TooLarge(u128),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no valid pairs to compute the metric over")]
    DegeneratePairs,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
