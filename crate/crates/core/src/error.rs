use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix has no rows")]
    Empty,
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 1 within 1e-12")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("invalid start distribution: {0}")]
    BadStart(String),
    #[error("chain is not irreducible")]
    NotIrreducible,
    #[error("stationary solve did not converge (residual {residual})")]
    StationaryNotConverged { residual: f64 },
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error("state {state} out of range for {m} states")]
    StateOutOfRange { state: usize, m: usize },
    #[error("state set is empty")]
    EmptySet,
    #[error("exhaustive enumeration supports at most {max} states, got {m}")]
    TooManyStates { m: usize, max: usize },
    #[error("hitting-time system is singular")]
    SingularSystem,
    #[error("argument outside its domain: {0}")]
    Domain(String),
    #[error("no samples")]
    NoSamples,
    #[error("calibration suite is empty")]
    EmptySuite,
    #[error("confidence interval too wide to certify c at resolution {resolution} (point estimate {point})")]
    InsufficientTrials { resolution: f64, point: f64 },
}
