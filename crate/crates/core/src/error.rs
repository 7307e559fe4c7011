use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("timestamp at position {index} is not finite or not above its predecessor")]
    NonMonotone { index: usize },
    #[error("duplicate timestamp {value} (the process must be simple)")]
    Duplicate { value: f64 },
    #[error("timestamp {value} outside the observation window (0, {window_end}]")]
    OutOfWindow { value: f64, window_end: f64 },
    #[error("observation window end must be a finite positive number, got {0}")]
    InvalidWindow(f64),
    #[error("series windows differ: {0} vs {1}")]
    WindowMismatch(f64, f64),
    #[error("series {0} has no events")]
    EmptySeries(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sharpness exponent alpha = 1 is excluded")]
    AlphaExcluded,
    #[error("offset {offset} needs at least {needed} buckets, only {buckets} available")]
    RangeTooNarrow {
        offset: i64,
        needed: u64,
        buckets: u64,
    },
    #[error("no occupied buckets in range for offset {offset}")]
    DegenerateDenominator { offset: i64 },
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error("maximizer set is empty")]
    EmptySet,
    #[error("difference multiset is empty")]
    EmptyDiffs,
    #[error("no bandwidth satisfies the comparison condition")]
    NoAdmissibleBandwidth,
    #[error("every cross-validation score is infinite")]
    AllScoresInfinite,
    #[error("branching matrix spectral radius {0} is not below 1")]
    UnstableSpec(f64),
    #[error("event budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error("CPCF is singular at u = {0}")]
    PoleAt(f64),
    #[error("CPCF oracle requires a common rate parameter")]
    UnsupportedRates,
    #[error("no analytic CPCF oracle for this model")]
    OracleUnavailable,
    #[error("need at least {needed} distinct points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
}
