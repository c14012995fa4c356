use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("time {0} is not a node of the fine grid")]
    NotAGridNode(f64),
    #[error("empty or degenerate window: {0}")]
    DegenerateWindow(String),
    #[error("partition is not nested in the rough-path grid: {0}")]
    PartitionNotNested(String),
    #[error("window touches t = 0: {0}")]
    WindowTouchesZero(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-Hermitian multiplier: {0}")]
    NonHermitian(String),
    #[error("exponents out of range: {0}")]
    Exponents(String),
    #[error("flavor mismatch: {0}")]
    FlavorMismatch(String),
    #[error("Picard iteration failed to contract (ratios {ratios:?})")]
    NonContraction { ratios: Vec<f64> },
    #[error("Picard iteration hit the iteration cap {0}")]
    MaxIterations(usize),
    #[error("smallness gate failed: η̄·|U₀|_3/2 = {product:e} > C* = {c_star:e}")]
    GateFailed { product: f64, c_star: f64 },
    #[error("verification failed: {}", .0.join("; "))]
    VerificationFailed(Vec<String>),
    #[error("config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("estimated memory {estimate} bytes exceeds cap {cap} bytes")]
    ResourceGuard { estimate: u64, cap: u64 },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("store format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
