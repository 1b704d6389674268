use thiserror::Error;

/// Errors raised by the geometry toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("frame count mismatch: {0} vs {1}")]
    FrameCountMismatch(usize, usize),
    #[error("no valid pixels in the overlap of prediction and ground truth")]
    EmptyOverlap,
    #[error("no valid entries in mask")]
    EmptyMask,
    #[error("prediction is identically zero on the valid overlap")]
    AllZeroPrediction,
    #[error("rank-deficient system: {0}")]
    RankDeficient(&'static str),
    #[error("degenerate point configuration: source covariance rank < 2")]
    DegenerateConfiguration,
    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(&'static str),
    #[error("no correspondences within {0} m")]
    NoCorrespondences(f64),
    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("no edge pixels detected in {0} map")]
    NoEdges(&'static str),
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("non-finite loss term `{0}`")]
    NonFiniteTerm(&'static str),
    #[error("head dimension must be even and positive, got {0}")]
    InvalidHeadDim(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
