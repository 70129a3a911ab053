use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("site {site} out of range 1..={len}")]
    SiteOutOfRange { site: usize, len: usize },
    #[error("chain length {len} exceeds the capacity limit of {limit} spins")]
    Capacity { len: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("sector leaks the operator (leakage {leakage:e} > tolerance {tolerance:e})")]
    SymmetryViolation { leakage: f64, tolerance: f64 },
    #[error("need at least 3 non-degenerate levels, got {0}")]
    TooFewLevels(usize),
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("|r| = {0} exceeds 1")]
    DecoherenceOutOfRange(f64),
    #[error("phase tracking lost: consecutive overlap {overlap:e} at sample {index}")]
    PhaseTracking { index: usize, overlap: f64 },
    #[error("unitary reference phase is zero")]
    ZeroReferencePhase,
    #[error("cannot normalize a constant sequence")]
    ConstantSequence,
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
