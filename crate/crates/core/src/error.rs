use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("energy level c = {c} does not exceed max V = {max_v}")]
    EnergyBelowPotential { c: f64, max_v: f64 },
    #[error("speed field is not positive (sampled value {0})")]
    NonPositiveSpeed(f64),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("lattice window too small: {0}")]
    WindowTooSmall(String),
    #[error("graph would have {nodes} nodes, limit is {limit}")]
    CapacityExceeded { nodes: u64, limit: u64 },
    #[error("node ({0}, {1}) lies outside the lattice window")]
    NodeOutOfWindow(i64, i64),
    #[error("target ({0}, {1}) was not reached")]
    Unreachable(i64, i64),
    #[error("window-stability check failed: {0} vs {1}")]
    WindowUnstable(f64, f64),
    #[error("direction ({0}, {1}) is not a primitive integer vector")]
    NonPrimitiveDirection(i64, i64),
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("subadditivity violated at k = {k}: s_k+1 = {next} > s_k = {prev}")]
    SubadditivityViolated { k: u32, prev: f64, next: f64 },
    #[error("norm table is degenerate: {0}")]
    DegenerateTable(String),
    #[error("origin is not an interior point of the polygon")]
    OriginNotInterior,
    #[error("front history mismatch: {0}")]
    HistoryMismatch(String),
    #[error("bisection bracket collapsed to width {width} before |g - 1| <= {tol}")]
    TolInfeasible { width: f64, tol: f64 },
    #[error("could not bracket the energy level: {0}")]
    EnergyBracketFailure(String),
    #[error("g(c) is not decreasing: g({c0}) = {g0}, g({c1}) = {g1}")]
    MonotonicityViolated { c0: f64, g0: f64, c1: f64, g1: f64 },
    #[error("endpoint levels {0} and {1} are indistinguishable within tolerance {2}")]
    IndistinguishableLevels(f64, f64, f64),
    #[error("inf-max descent diverged after {0} iterations")]
    Divergence(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("paths come from different fields or grid parameters")]
    ParamMismatch,
    #[error("invalid splice: {0}")]
    InvalidSplice(String),
    #[error("postcondition failed: {0}")]
    Postcondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
