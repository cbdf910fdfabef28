use thiserror::Error;

/// Errors produced by validation, pooling, distances, mining and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix needs at least one row and one column, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("data length {actual} does not match declared shape {rows}x{cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        actual: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("input must contain at least one value")]
    EmptyInput,

    #[error("bin count must be at least 1")]
    NonPositiveBinCount,

    #[error("sample count must be at least 1")]
    NonPositiveSampleCount,

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("quantile level {level} lies outside [0, 1]")]
    LevelOutOfRange { level: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("query set is empty")]
    EmptyQuerySet,

    #[error("gallery set is empty")]
    EmptyGallerySet,

    #[error("batch needs at least two distinct labels, found {0}")]
    InsufficientLabels(usize),

    #[error("label {0:?} occurs once; every label in the batch needs at least two members")]
    SingletonLabel(String),

    #[error("negative distance at row {row}, column {col}")]
    NegativeDistance { row: usize, col: usize },

    #[error("rank {rank} exceeds gallery size {gallery}")]
    RankExceedsGallery { rank: usize, gallery: usize },

    #[error("CMC ranks must be at least 1")]
    ZeroRank,

    #[error("ranked list out of order at position {0}")]
    UnsortedRanking(usize),

    #[error("query {0:?} has no relevant gallery item")]
    NoRelevantItems(String),
}

pub type Result<T> = std::result::Result<T, Error>;
