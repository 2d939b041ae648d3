use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty domain: the mask has no inside pixel")]
    EmptyDomain,

    #[error("degenerate domain: inside pixel ({x}, {y}) has no inside 4-neighbour")]
    IsolatedPixel { x: usize, y: usize },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no upwind information: every neighbour value is infinite")]
    NoUpwindInformation,

    #[error("fast marching left {count} pixel(s) unreachable from the seeds")]
    Unreachable { count: usize },

    #[error("pivot breakdown at row {row} (pivot {pivot:e})")]
    PivotBreakdown { row: usize, pivot: f64 },

    #[error("conjugate gradient breakdown: pᵀAp = {curvature:e} at iteration {iteration}")]
    CgBreakdown { iteration: usize, curvature: f64 },

    #[error("rank-deficient lighting matrix")]
    RankDeficientLighting,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
