//! Distribution-valued temporal pooling for tracklet retrieval.
//!
//! A tracklet's frame features are pooled per feature into equal-width
//! histograms and their quantile functions, instead of being averaged into a
//! single vector. Tracklets are then compared by the 1-D Wasserstein distance
//! between quantile functions, summed over features, either in closed form or
//! through a fixed midpoint sampling that turns the distance into a scaled L1
//! norm. On top of that sit a triplet loss with batch-hard mining, gallery
//! ranking with CMC/mAP evaluation, and binary formats plus a dataset
//! manifest for moving everything through files.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common case.
//!
//! ```
//! use symtp::{pool_tracklet, rep_distance, DistanceMode, PoolingConfig};
//! use symtp::{FrameFeatureMatrix, Tracklet};
//!
//! let walk = Tracklet::new(
//!     "person-1",
//!     None,
//!     FrameFeatureMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0])?,
//! );
//! let stand = Tracklet::new(
//!     "person-2",
//!     None,
//!     FrameFeatureMatrix::new(4, 1, vec![1.5, 1.5, 1.5, 1.5])?,
//! );
//! let cfg = PoolingConfig::default();
//! let a = pool_tracklet(&walk, &cfg)?;
//! let b = pool_tracklet(&stand, &cfg)?;
//! let d = rep_distance(&a, &b, DistanceMode::Exact)?;
//! assert!(d > 0.0);
//! # Ok::<(), symtp::Error>(())
//! ```

pub mod error;
pub mod io;
pub mod loss;
pub mod metric;
pub mod retrieval;
pub mod scalar;
pub mod symbolic;
pub mod types;

pub use error::{Error, Result};
pub use loss::{batch_hard_mine, symbolic_triplet_loss, triplet_loss, Triplet};
pub use metric::{
    avg_pool, distance_matrix, euclidean, max_pool, rep_distance, w1_exact, w1_sampled,
    DistanceMatrix, DistanceMode,
};
pub use retrieval::{
    cmc, evaluate, mean_average_precision, rank_distances, rank_gallery, CmcPoint, EvalProtocol,
    EvalReport, LabeledRep, RankedItem, RetrievalResult,
};
pub use scalar::Scalar;
pub use symbolic::{build_histogram, pool_tracklet, sample_quantiles};
pub use types::{
    BinPolicy, FeatureHistogram, FrameFeatureMatrix, PoolingConfig, QuantileFunction,
    SymbolicRepresentation, Tracklet,
};

/// Double-precision aliases, the default choice.
pub type FeatureHistogram64 = FeatureHistogram<f64>;
pub type QuantileFunction64 = QuantileFunction<f64>;
pub type FrameFeatureMatrix64 = FrameFeatureMatrix<f64>;
pub type Tracklet64 = Tracklet<f64>;
pub type SymbolicRepresentation64 = SymbolicRepresentation<f64>;
pub type DistanceMatrix64 = DistanceMatrix<f64>;

/// Single-precision aliases for memory-bound pipelines.
pub type FeatureHistogram32 = FeatureHistogram<f32>;
pub type QuantileFunction32 = QuantileFunction<f32>;
pub type FrameFeatureMatrix32 = FrameFeatureMatrix<f32>;
pub type Tracklet32 = Tracklet<f32>;
pub type SymbolicRepresentation32 = SymbolicRepresentation<f32>;
pub type DistanceMatrix32 = DistanceMatrix<f32>;
