use thiserror::Error;

/// Errors raised across the simulator and its analysis helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("basis of dimension {dimension} needs {bytes} bytes, above the {limit}-byte cap")]
    CapacityExceeded { dimension: u128, bytes: u128, limit: u64 },

    #[error("invalid occupancy: site {site} has code {code}, levels per site is {levels_per_site}")]
    InvalidOccupancy { site: usize, code: u8, levels_per_site: usize },

    #[error("basis index {index} out of range for dimension {dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },

    #[error("invalid basis shape: {0}")]
    InvalidShape(String),

    #[error("intermediate-state detuning must be non-zero")]
    ZeroDetuning,

    #[error("root solve did not converge: {0}")]
    NoConvergence(String),

    #[error("time {t} ns outside schedule window [0, {duration}] ns")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("level {0} is not part of the level set")]
    UnknownLevel(u32),

    #[error("expected a positive value for {0}")]
    NonPositiveInput(&'static str),

    #[error("a polygon needs at least 3 sites, got {0}")]
    TooFewSites(usize),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid level set: {0}")]
    InvalidLevels(String),

    #[error("invalid drive schedule: {0}")]
    InvalidSchedule(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("norm drift {drift:.3e} exceeds {limit:.1e}; try a smaller dt (current {dt} ns)")]
    NormDriftExceeded { drift: f64, limit: f64, dt: f64 },

    #[error("invalid time step or record times: {0}")]
    InvalidTimeGrid(String),

    #[error("objective set is empty")]
    EmptyObjective,

    #[error("invalid probability {name} = {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("per-run success probability is zero; no finite budget exists")]
    ImpossibleBudget,

    #[error("invalid quantum numbers n = {n}, l = {l}")]
    InvalidQuantumNumbers { n: u32, l: u32 },

    #[error("site {site} out of range for a graph with {nodes} nodes")]
    SiteOutOfRange { site: usize, nodes: usize },

    #[error("graph with {0} nodes is too large for exhaustive search")]
    TooLarge(usize),

    #[error("invalid search spec: {0}")]
    InvalidSearch(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
