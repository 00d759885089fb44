use thiserror::Error;

pub type Result<T, E = TomoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("null vector cannot be normalized")]
    NullVector,

    #[error("ground space is degenerate: gap {gap:e} below tolerance (E0 = {energy})")]
    DegenerateGround { energy: f64, gap: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("explicit coupling matrix is not unitary (max deviation {0:e})")]
    NonUnitary(f64),

    #[error("theta = {0} is outside (0, pi/2)")]
    ThetaOutOfRange(f64),

    #[error("dense materialization refused for N = {size} (cap {cap})")]
    TooLarge { size: usize, cap: usize },

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("count table holds no shots")]
    EmptyCounts,

    #[error("relative phase undefined on row {x}: |combination| = {magnitude:e}")]
    PhaseUndefined { x: usize, magnitude: f64 },

    #[error("dangerous case (i): coupling is diagonal in the computational basis")]
    CompatibleBasis,

    #[error("dangerous case (ii): coupling splits into {} blocks", components.len())]
    BlockDiagonal { components: Vec<Vec<usize>> },

    #[error("reconstruction system is rank deficient: rank {rank} of {cols} (condition estimate {condition:e})")]
    RankDeficient {
        rank: usize,
        cols: usize,
        condition: f64,
    },

    #[error("no basis index carries support for the reference amplitude")]
    NoReference,

    #[error("iteration {iter} produced a zero-norm candidate")]
    ZeroIterate { iter: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
