use thiserror::Error;

/// Errors raised by the analysis, estimation and simulation layers.
///
/// Variant names double as the error names printed by the command-line tool.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("non-uniform sampling at indices {indices:?}")]
    Gap { indices: Vec<usize> },
    #[error("invariant violated at index {index}: {msg}")]
    Invariant { index: usize, msg: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("every grid point fell below the reliability threshold")]
    EmptyEstimate,
    #[error("evaluation grids differ: {0}")]
    GridMismatch(String),
    #[error("unstable fit: drift slope {slope} has no restoring force")]
    UnstableFit { slope: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("wrong density kind: {0}")]
    WrongKind(String),
    #[error("density is not normalisable: {0}")]
    DivergentDensity(String),
    #[error("moment of order {order} diverges (nu = {nu})")]
    MomentDivergence { order: u32, nu: f64 },
    #[error("grid topology: {0}")]
    Topology(String),
    #[error("grid schema: {0}")]
    Schema(String),
    #[error("infeasible dispatch: demand {demand} MW exceeds capacity {capacity} MW")]
    Infeasible { demand: f64, capacity: f64 },
    #[error("no fixed point: {0}")]
    NoFixedPoint(String),
    #[error("trajectory diverged at t = {time} s (|omega| = {omega})")]
    Divergence { time: f64, omega: f64 },
    #[error("non-finite state at t = {0} s")]
    Numerical(f64),
    #[error("configuration: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short, stable name of the variant (`GapError`, `ParseError`, ...).
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::Parse { .. } => "ParseError",
            Error::Gap { .. } => "GapError",
            Error::Invariant { .. } => "InvariantError",
            Error::Degenerate(_) => "DegenerateError",
            Error::InvalidArgument(_) => "InvalidArgumentError",
            Error::EmptyEstimate => "EmptyEstimateError",
            Error::GridMismatch(_) => "GridMismatchError",
            Error::UnstableFit { .. } => "UnstableFitError",
            Error::DegenerateFit(_) => "DegenerateFitError",
            Error::WrongKind(_) => "WrongKindError",
            Error::DivergentDensity(_) => "DivergentDensityError",
            Error::MomentDivergence { .. } => "MomentDivergenceError",
            Error::Topology(_) => "TopologyError",
            Error::Schema(_) => "SchemaError",
            Error::Infeasible { .. } => "InfeasibleError",
            Error::NoFixedPoint(_) => "NoFixedPointError",
            Error::Divergence { .. } => "DivergenceError",
            Error::Numerical(_) => "NumericalError",
            Error::Config(_) => "ConfigError",
            Error::Json(_) => "JsonError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
