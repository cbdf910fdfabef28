use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `rows x cols` matrix of per-frame feature activations.
///
/// Row `i` holds the feature vector of frame `i`; column `j` collects feature
/// `j` across frames. Construction validates shape and finiteness, so a value
/// of this type is always well formed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureMatrix<S: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> FrameFeatureMatrix<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        Self::validate_parts(rows, cols, &data)?;
        Ok(Self { rows, cols, data })
    }

    /// Checks the matrix invariants without constructing anything.
    pub fn validate_parts(rows: usize, cols: usize, data: &[S]) -> Result<()> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                rows,
                cols,
                actual: data.len(),
            });
        }
        for (i, value) in data.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: i / cols,
                    col: i % cols,
                });
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    /// Iterates over column `c`, one value per frame.
    pub fn column(&self, c: usize) -> impl Iterator<Item = S> + '_ {
        self.data[c..].iter().step_by(self.cols).copied()
    }
}

/// A tracklet: an identity label, an optional camera label and the frame
/// features observed for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet<S: Scalar> {
    pub id: String,
    pub camera: Option<String>,
    pub features: FrameFeatureMatrix<S>,
}

impl<S: Scalar> Tracklet<S> {
    pub fn new(id: impl Into<String>, camera: Option<String>, features: FrameFeatureMatrix<S>) -> Self {
        Self {
            id: id.into(),
            camera,
            features,
        }
    }

    /// Re-checks the feature matrix invariants.
    pub fn validate(&self) -> Result<()> {
        FrameFeatureMatrix::validate_parts(
            self.features.rows(),
            self.features.cols(),
            self.features.data(),
        )
    }

    pub fn frame_count(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }
}

/// Normalized equal-width histogram of one feature across the frames of a
/// tracklet.
///
/// `freqs[l]` is the fraction of frames falling in bin `l` of `[lo, hi]`, and
/// `cum` holds the prefix sums with `cum[0] = 0`. A degenerate feature that
/// takes a single value is stored as a point mass: `lo == hi` with exactly one
/// bin of mass one.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram<S: Scalar> {
    lo: S,
    hi: S,
    freqs: Vec<S>,
    cum: Vec<S>,
}

impl<S: Scalar> FeatureHistogram<S> {
    /// Builds a histogram from its support and bin masses, validating every
    /// invariant. `cum` is recomputed here, which keeps file round trips exact.
    pub fn from_parts(lo: S, hi: S, freqs: Vec<S>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::NonPositiveBinCount);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidHistogram("non-finite support bound".into()));
        }
        if lo > hi {
            return Err(Error::InvalidHistogram(format!(
                "support is inverted: lo {lo} > hi {hi}"
            )));
        }
        if lo == hi && freqs.len() != 1 {
            return Err(Error::InvalidHistogram(format!(
                "point mass must have exactly one bin, got {}",
                freqs.len()
            )));
        }
        let mut cum = Vec::with_capacity(freqs.len() + 1);
        let mut total = S::zero();
        cum.push(total);
        for (l, &f) in freqs.iter().enumerate() {
            if !f.is_finite() || f < S::zero() {
                return Err(Error::InvalidHistogram(format!(
                    "bin {l} has invalid mass {f}"
                )));
            }
            total = total + f;
            cum.push(total);
        }
        if (total - S::one()).abs() > Self::mass_tolerance(freqs.len()) {
            return Err(Error::InvalidHistogram(format!(
                "bin masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { lo, hi, freqs, cum })
    }

    /// Slack allowed on the total mass: 1e-9, widened when the scalar's own
    /// epsilon makes that unreachable (f32 with many bins).
    fn mass_tolerance(bins: usize) -> S {
        let base = S::from_f64_lossy(1e-9);
        let eps = S::epsilon() * S::from_count(8 * (bins + 1));
        base.max(eps)
    }

    pub fn lo(&self) -> S {
        self.lo
    }

    pub fn hi(&self) -> S {
        self.hi
    }

    pub fn bin_count(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[S] {
        &self.freqs
    }

    /// Prefix sums of the bin masses; `cum[0] = 0` and `cum[bin_count]` is the
    /// total mass.
    pub fn cum(&self) -> &[S] {
        &self.cum
    }

    pub fn is_point_mass(&self) -> bool {
        self.lo == self.hi
    }

    pub fn bin_width(&self) -> S {
        (self.hi - self.lo) / S::from_count(self.bin_count())
    }

    /// Bin edge `k` for `k` in `0..=bin_count`; the last edge is exactly `hi`.
    pub fn edge(&self, k: usize) -> S {
        debug_assert!(k <= self.bin_count());
        if k == self.bin_count() {
            self.hi
        } else {
            self.lo + S::from_count(k) * self.bin_width()
        }
    }
}

/// Piecewise-linear quantile function (generalized inverse ECDF) of one
/// pooled feature.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction<S: Scalar> {
    hist: FeatureHistogram<S>,
}

impl<S: Scalar> QuantileFunction<S> {
    pub fn new(hist: FeatureHistogram<S>) -> Self {
        Self { hist }
    }

    pub fn histogram(&self) -> &FeatureHistogram<S> {
        &self.hist
    }

    pub fn support(&self) -> (S, S) {
        (self.hist.lo(), self.hist.hi())
    }
}

/// The pooled form of a tracklet: one quantile function per feature, plus the
/// sample count used when the representation is flattened to a vector.
///
/// The flattened vector is materialized lazily and cached; see
/// [`SymbolicRepresentation::sampled`].
#[derive(Debug, Clone)]
pub struct SymbolicRepresentation<S: Scalar> {
    per_feature: Vec<QuantileFunction<S>>,
    t_samples: usize,
    pub(crate) sampled: OnceLock<Vec<S>>,
}

impl<S: Scalar> SymbolicRepresentation<S> {
    pub fn new(per_feature: Vec<QuantileFunction<S>>, t_samples: usize) -> Result<Self> {
        if per_feature.is_empty() {
            return Err(Error::EmptyInput);
        }
        if t_samples == 0 {
            return Err(Error::NonPositiveSampleCount);
        }
        Ok(Self {
            per_feature,
            t_samples,
            sampled: OnceLock::new(),
        })
    }

    pub fn feature_count(&self) -> usize {
        self.per_feature.len()
    }

    pub fn t_samples(&self) -> usize {
        self.t_samples
    }

    pub fn features(&self) -> &[QuantileFunction<S>] {
        &self.per_feature
    }

    pub fn feature(&self, m: usize) -> &QuantileFunction<S> {
        &self.per_feature[m]
    }
}

impl<S: Scalar> PartialEq for SymbolicRepresentation<S> {
    /// Compares the quantile functions and the sample count; the lazily
    /// cached vector is derived data and takes no part in equality.
    fn eq(&self, other: &Self) -> bool {
        self.t_samples == other.t_samples && self.per_feature == other.per_feature
    }
}

/// How many bins a pooled histogram gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinPolicy {
    /// `ceil(sqrt(frame_count))`, the default.
    SqrtFrames,
    /// A fixed bin count shared by every feature.
    Fixed(usize),
}

/// Pooling parameters: bin policy and the quantile sample count `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolingConfig {
    pub bins: BinPolicy,
    pub t_samples: usize,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        Self {
            bins: BinPolicy::SqrtFrames,
            t_samples: 64,
        }
    }
}

impl PoolingConfig {
    pub fn validate(&self) -> Result<()> {
        if let BinPolicy::Fixed(0) = self.bins {
            return Err(Error::NonPositiveBinCount);
        }
        if self.t_samples == 0 {
            return Err(Error::NonPositiveSampleCount);
        }
        Ok(())
    }

    /// Resolves the bin count for a tracklet with `frames` frames.
    pub fn bin_count_for(&self, frames: usize) -> usize {
        match self.bins {
            BinPolicy::SqrtFrames => (frames as f64).sqrt().ceil().max(1.0) as usize,
            BinPolicy::Fixed(h) => h,
        }
    }
}
