use thiserror::Error;

/// Construction and validation failures for lattice/model inputs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("lattice must have at least one site")]
    EmptyLattice,
    #[error("coarse-graining ratio q={q} must divide N={n} exactly")]
    RatioDoesNotDivide { q: usize, n: usize },
    #[error("coarse-graining ratio q={q} outside 1..=N ({n})")]
    RatioOutOfRange { q: usize, n: usize },
    #[error("interaction range L={l} outside 1..=N/2 ({n})")]
    RangeOutOfBounds { l: usize, n: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },
    #[error("inverse temperature beta must be >= 0, got {0}")]
    NegativeBeta(f64),
    #[error("configuration length {got} does not match lattice ({expected})")]
    ConfigLength { got: usize, expected: usize },
    #[error("block occupancy {value} at cell {cell} exceeds q={q}")]
    BlockOverflow { cell: usize, value: u32, q: usize },
    #[error("per-site field length {got} does not match lattice ({expected})")]
    FieldLength { got: usize, expected: usize },
}

/// Runtime failures of the KMC machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KmcError {
    #[error("total rate is zero: absorbing state (cannot occur while d0 > 0)")]
    AbsorbingState,
    #[error("illegal {kind:?} event at unit {location}: rate table out of sync with configuration")]
    IllegalEvent {
        kind: crate::kmc::EventKind,
        location: usize,
    },
    #[error("rate table totals drifted beyond tolerance: {0}")]
    TotalsDrift(f64),
    #[error("invalid run setup: {0}")]
    BadRun(&'static str),
}

/// Failures in the brute-force oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("state space too large: {states} states exceeds cap {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },
    #[error("generator is not solvable (singular linear system)")]
    SingularGenerator,
}

/// Contract violations in observable/error computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("histograms must share identical bin edges")]
    EdgeMismatch,
    #[error("need at least one sample")]
    NoSamples,
    #[error("number of bins must be >= 1")]
    NoBins,
    #[error("merge factor {factor} does not divide bin count {bins}")]
    BadMergeFactor { factor: usize, bins: usize },
    #[error("ensembles must have equal size and share the sampling grid")]
    EnsembleMismatch,
    #[error("threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
}
