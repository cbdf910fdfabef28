//! Pooling of frame features into histograms and quantile functions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{
    FeatureHistogram, PoolingConfig, QuantileFunction, SymbolicRepresentation, Tracklet,
};

/// Maps a value to its equal-width bin, clamping the upper support bound into
/// the last bin. Guards against a zero or rounded-away width.
fn bin_index<S: Scalar>(value: S, lo: S, width: S, bins: usize) -> usize {
    if width <= S::zero() {
        return bins - 1;
    }
    let ratio = ((value - lo) / width).floor();
    match ratio.to_usize() {
        Some(i) => i.min(bins - 1),
        None => bins - 1,
    }
}

/// Builds the equal-width histogram of `values` over `[min, max]`.
///
/// A constant input collapses to a point mass with a single bin. Values equal
/// to the upper bound are counted in the last bin, so the bins cover the
/// closed support.
pub fn build_histogram<S: Scalar>(values: &[S], bin_count: usize) -> Result<FeatureHistogram<S>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bin_count == 0 {
        return Err(Error::NonPositiveBinCount);
    }
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { row: i, col: 0 });
        }
    }
    let mut lo = values[0];
    let mut hi = values[0];
    for &v in &values[1..] {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        return FeatureHistogram::from_parts(lo, hi, vec![S::one()]);
    }
    let width = (hi - lo) / S::from_count(bin_count);
    let mut counts = vec![0usize; bin_count];
    for &v in values {
        counts[bin_index(v, lo, width, bin_count)] += 1;
    }
    let n = S::from_count(values.len());
    let freqs = counts.iter().map(|&c| S::from_count(c) / n).collect();
    FeatureHistogram::from_parts(lo, hi, freqs)
}

impl<S: Scalar> FeatureHistogram<S> {
    /// Piecewise-linear ECDF at `p`: 0 at or below `lo`, 1 at or above `hi`,
    /// linear within each bin. A point mass steps from 0 to 1 at `lo`.
    ///
    /// The result is clamped into the bin's cumulative range, which makes the
    /// function exactly nondecreasing despite rounding.
    pub fn ecdf(&self, p: S) -> S {
        debug_assert!(!p.is_nan());
        if self.is_point_mass() {
            return if p < self.lo() { S::zero() } else { S::one() };
        }
        if p <= self.lo() {
            return S::zero();
        }
        if p >= self.hi() {
            return S::one();
        }
        let width = self.bin_width();
        let b = bin_index(p, self.lo(), width, self.bin_count());
        let cum = self.cum();
        let frac = (p - self.edge(b)) / width;
        let value = cum[b] + self.freqs()[b] * frac;
        // The prefix sums can overshoot 1 by rounding; stay inside [0, 1].
        value.max(cum[b]).min(cum[b + 1]).min(S::one())
    }
}

impl<S: Scalar> QuantileFunction<S> {
    /// Generalized inverse ECDF at level `t` in `[0, 1]`.
    ///
    /// `t = 0` maps to `lo` and `t = 1` to `hi`. Interior levels interpolate
    /// linearly inside the bin whose cumulative range contains `t`; bins with
    /// zero mass are skipped, and at a shared boundary the left bin wins, so
    /// the function is left-continuous there. A point mass returns `lo`
    /// everywhere.
    pub fn eval(&self, t: S) -> Result<S> {
        if t.is_nan() || t < S::zero() || t > S::one() {
            return Err(Error::LevelOutOfRange { level: t.widen() });
        }
        Ok(self.eval_clamped(t))
    }

    /// As [`eval`](Self::eval), assuming `0 <= t <= 1`.
    ///
    /// Exactly nondecreasing in `t`: each segment's value is forced into
    /// `[left_edge, right_edge]` and consecutive segments share edges.
    pub(crate) fn eval_clamped(&self, t: S) -> S {
        let h = self.histogram();
        if h.is_point_mass() || t <= S::zero() {
            return h.lo();
        }
        if t >= S::one() {
            return h.hi();
        }
        let cum = h.cum();
        // First b with cum[b] < t <= cum[b + 1]; such a bin has positive mass.
        let b = cum[1..].partition_point(|&c| c < t);
        if b >= h.bin_count() {
            return h.hi();
        }
        let span = cum[b + 1] - cum[b];
        let left = h.edge(b);
        let right = h.edge(b + 1);
        if span <= S::zero() {
            return right;
        }
        let value = left + (right - left) * ((t - cum[b]) / span);
        value.min(right)
    }
}

impl<S: Scalar> SymbolicRepresentation<S> {
    /// The flattened vector form: for every feature, the quantile function
    /// sampled at the `T` midpoint levels `(k + 0.5) / T`, concatenated in
    /// feature order.
    ///
    /// Computed on first use and cached, so repeated distance evaluations pay
    /// the sampling cost once.
    pub fn sampled(&self) -> &[S] {
        self.sampled.get_or_init(|| sample_quantiles(self))
    }
}

/// Samples every quantile function of `rep` at the midpoint grid
/// `(k + 0.5) / T`, `k = 0..T`, returning the feature-major concatenation.
pub fn sample_quantiles<S: Scalar>(rep: &SymbolicRepresentation<S>) -> Vec<S> {
    let t_count = rep.t_samples();
    let inv = S::one() / S::from_count(t_count);
    let half = S::from_f64_lossy(0.5);
    let mut out = Vec::with_capacity(rep.feature_count() * t_count);
    for q in rep.features() {
        for k in 0..t_count {
            let level = (S::from_count(k) + half) * inv;
            out.push(q.eval_clamped(level));
        }
    }
    out
}

/// Pools a tracklet into its symbolic representation: one histogram-backed
/// quantile function per feature column.
pub fn pool_tracklet<S: Scalar>(
    tracklet: &Tracklet<S>,
    config: &PoolingConfig,
) -> Result<SymbolicRepresentation<S>> {
    config.validate()?;
    tracklet.validate()?;
    let bins = config.bin_count_for(tracklet.frame_count());
    let mut column = Vec::with_capacity(tracklet.frame_count());
    let mut per_feature = Vec::with_capacity(tracklet.feature_count());
    for c in 0..tracklet.feature_count() {
        column.clear();
        column.extend(tracklet.features.column(c));
        per_feature.push(QuantileFunction::new(build_histogram(&column, bins)?));
    }
    SymbolicRepresentation::new(per_feature, config.t_samples)
}
