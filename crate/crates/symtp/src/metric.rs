//! Wasserstein distances between pooled representations, the pairwise
//! distance matrix, and the flat pooling baselines.

use std::borrow::Borrow;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{FeatureHistogram, QuantileFunction, SymbolicRepresentation, Tracklet};

/// How representation distances are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// Closed-form integral of the quantile difference, summed over features.
    Exact,
    /// Mean absolute difference of the cached midpoint samples.
    Sampled,
}

impl std::fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceMode::Exact => "exact",
            DistanceMode::Sampled => "sampled",
        })
    }
}

impl std::str::FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(DistanceMode::Exact),
            "sampled" => Ok(DistanceMode::Sampled),
            other => Err(Error::ShapeMismatch(format!(
                "unknown distance mode {other:?}, expected \"exact\" or \"sampled\""
            ))),
        }
    }
}

/// Values of the quantile function at both ends of a breakpoint-free segment
/// `(u, v]`, located by the segment midpoint. Where the function jumps (zero
/// mass between positive bins) the right limit is used, which leaves the
/// integral unchanged.
fn segment_endpoints<S: Scalar>(h: &FeatureHistogram<S>, u: S, v: S, mid: S) -> (S, S) {
    if h.is_point_mass() {
        return (h.lo(), h.lo());
    }
    let cum = h.cum();
    let b = cum[1..]
        .partition_point(|&c| c < mid)
        .min(h.bin_count() - 1);
    let span = cum[b + 1] - cum[b];
    let left = h.edge(b);
    let right = h.edge(b + 1);
    if span <= S::zero() {
        return (right, right);
    }
    let scale = (right - left) / span;
    (left + scale * (u - cum[b]), left + scale * (v - cum[b]))
}

/// Integral of `|linear|` over a segment of width `h` with endpoint values
/// `du` and `dv`: a trapezoid when the sign is constant, two triangles when
/// the difference crosses zero.
fn segment_l1<S: Scalar>(h: S, du: S, dv: S) -> S {
    let half = S::from_f64_lossy(0.5);
    if (du >= S::zero()) == (dv >= S::zero()) {
        h * (du.abs() + dv.abs()) * half
    } else {
        let denom = du.abs() + dv.abs();
        h * (du * du + dv * dv) / (denom + denom)
    }
}

/// Exact 1-D Wasserstein distance between two quantile functions.
///
/// Both functions are piecewise linear with breakpoints on their cumulative
/// grids, so the integral of the absolute difference is evaluated in closed
/// form over the merged grid. The computation is symmetric in its arguments
/// down to the last bit.
pub fn w1_exact<S: Scalar>(a: &QuantileFunction<S>, b: &QuantileFunction<S>) -> S {
    let ha = a.histogram();
    let hb = b.histogram();
    let mut knots: Vec<S> = Vec::with_capacity(ha.bin_count() + hb.bin_count() + 3);
    knots.extend(ha.cum().iter().copied().filter(|&c| c < S::one()));
    knots.extend(hb.cum().iter().copied().filter(|&c| c < S::one()));
    knots.push(S::one());
    knots.sort_by(|x, y| x.partial_cmp(y).expect("cumulative masses are finite"));
    knots.dedup();

    let half = S::from_f64_lossy(0.5);
    let mut total = S::zero();
    for w in knots.windows(2) {
        let (u, v) = (w[0], w[1]);
        let width = v - u;
        if width <= S::zero() {
            continue;
        }
        let mid = (u + v) * half;
        let (au, av) = segment_endpoints(ha, u, v, mid);
        let (bu, bv) = segment_endpoints(hb, u, v, mid);
        total = total + segment_l1(width, au - bu, av - bv);
    }
    total
}

/// Mean absolute difference accumulated in four independent lanes; the
/// summation order is fixed, so results do not depend on how callers are
/// scheduled.
fn l1_distance<S: Scalar>(u: &[S], v: &[S]) -> S {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = [S::zero(); 4];
    for (cu, cv) in u.chunks_exact(4).zip(v.chunks_exact(4)) {
        acc[0] = acc[0] + (cu[0] - cv[0]).abs();
        acc[1] = acc[1] + (cu[1] - cv[1]).abs();
        acc[2] = acc[2] + (cu[2] - cv[2]).abs();
        acc[3] = acc[3] + (cu[3] - cv[3]).abs();
    }
    let tail_start = u.len() - u.len() % 4;
    let mut tail = S::zero();
    for i in tail_start..u.len() {
        tail = tail + (u[i] - v[i]).abs();
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

fn sampled_distance<S: Scalar>(u: &[S], v: &[S], inv_t: S) -> S {
    l1_distance(u, v) * inv_t
}

fn check_compatible<S: Scalar>(
    a: &SymbolicRepresentation<S>,
    b: &SymbolicRepresentation<S>,
    mode: DistanceMode,
) -> Result<()> {
    if a.feature_count() != b.feature_count() {
        return Err(Error::ShapeMismatch(format!(
            "feature counts differ: {} vs {}",
            a.feature_count(),
            b.feature_count()
        )));
    }
    if mode == DistanceMode::Sampled && a.t_samples() != b.t_samples() {
        return Err(Error::ShapeMismatch(format!(
            "sample counts differ: {} vs {}",
            a.t_samples(),
            b.t_samples()
        )));
    }
    Ok(())
}

fn rep_distance_unchecked<S: Scalar>(
    a: &SymbolicRepresentation<S>,
    b: &SymbolicRepresentation<S>,
    mode: DistanceMode,
) -> S {
    match mode {
        DistanceMode::Exact => a
            .features()
            .iter()
            .zip(b.features())
            .fold(S::zero(), |acc, (x, y)| acc + w1_exact(x, y)),
        DistanceMode::Sampled => {
            let inv_t = S::one() / S::from_count(a.t_samples());
            sampled_distance(a.sampled(), b.sampled(), inv_t)
        }
    }
}

/// Sampled Wasserstein distance: the mean absolute difference of the two
/// flattened representations, summed over features.
pub fn w1_sampled<S: Scalar>(
    a: &SymbolicRepresentation<S>,
    b: &SymbolicRepresentation<S>,
) -> Result<S> {
    check_compatible(a, b, DistanceMode::Sampled)?;
    Ok(rep_distance_unchecked(a, b, DistanceMode::Sampled))
}

/// Distance between two representations in the requested mode.
pub fn rep_distance<S: Scalar>(
    a: &SymbolicRepresentation<S>,
    b: &SymbolicRepresentation<S>,
    mode: DistanceMode,
) -> Result<S> {
    check_compatible(a, b, mode)?;
    Ok(rep_distance_unchecked(a, b, mode))
}

/// Dense query-by-gallery matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<S: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DistanceMatrix<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::EmptyQuerySet);
        }
        if cols == 0 {
            return Err(Error::EmptyGallerySet);
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                rows,
                cols,
                actual: data.len(),
            });
        }
        for (i, &d) in data.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: i / cols,
                    col: i % cols,
                });
            }
            if d < S::zero() {
                return Err(Error::NegativeDistance {
                    row: i / cols,
                    col: i % cols,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }
}

/// Rows handed to one parallel task at a time.
const ROW_CHUNK: usize = 16;
/// Gallery vectors processed per pass so they stay cache resident.
const GALLERY_BLOCK: usize = 32;

/// Computes all query-gallery distances.
///
/// Sampled vectors are materialized once up front; the kernel then walks the
/// gallery in blocks. Each matrix entry is produced by a fixed-order
/// summation, so the result is bit-identical for any worker count.
pub fn distance_matrix<S, Q, G>(
    queries: &[Q],
    gallery: &[G],
    mode: DistanceMode,
) -> Result<DistanceMatrix<S>>
where
    S: Scalar,
    Q: Borrow<SymbolicRepresentation<S>> + Sync,
    G: Borrow<SymbolicRepresentation<S>> + Sync,
{
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    if gallery.is_empty() {
        return Err(Error::EmptyGallerySet);
    }
    let first = queries[0].borrow();
    for q in queries {
        check_compatible(first, q.borrow(), mode)?;
    }
    for g in gallery {
        check_compatible(first, g.borrow(), mode)?;
    }

    let q_len = queries.len();
    let g_len = gallery.len();
    let mut data = vec![S::zero(); q_len * g_len];
    match mode {
        DistanceMode::Exact => {
            data.par_chunks_mut(g_len)
                .enumerate()
                .for_each(|(i, row)| {
                    let qi = queries[i].borrow();
                    for (j, g) in gallery.iter().enumerate() {
                        row[j] = rep_distance_unchecked(qi, g.borrow(), DistanceMode::Exact);
                    }
                });
        }
        DistanceMode::Sampled => {
            queries.par_iter().for_each(|q| {
                q.borrow().sampled();
            });
            gallery.par_iter().for_each(|g| {
                g.borrow().sampled();
            });
            let q_vecs: Vec<&[S]> = queries.iter().map(|q| q.borrow().sampled()).collect();
            let g_vecs: Vec<&[S]> = gallery.iter().map(|g| g.borrow().sampled()).collect();
            let inv_t = S::one() / S::from_count(first.t_samples());
            data.par_chunks_mut(g_len * ROW_CHUNK)
                .zip(q_vecs.par_chunks(ROW_CHUNK))
                .for_each(|(rows, qs)| {
                    for g_start in (0..g_len).step_by(GALLERY_BLOCK) {
                        let g_end = (g_start + GALLERY_BLOCK).min(g_len);
                        for (local, q) in qs.iter().enumerate() {
                            let row = &mut rows[local * g_len..(local + 1) * g_len];
                            for j in g_start..g_end {
                                row[j] = sampled_distance(q, g_vecs[j], inv_t);
                            }
                        }
                    }
                });
        }
    }
    Ok(DistanceMatrix {
        rows: q_len,
        cols: g_len,
        data,
    })
}

/// Frame-wise mean of each feature column.
pub fn avg_pool<S: Scalar>(tracklet: &Tracklet<S>) -> Vec<S> {
    let features = &tracklet.features;
    let n = S::from_count(features.rows());
    let mut out = vec![S::zero(); features.cols()];
    for r in 0..features.rows() {
        for (o, &v) in out.iter_mut().zip(features.row(r)) {
            *o = *o + v;
        }
    }
    for o in &mut out {
        *o = *o / n;
    }
    out
}

/// Frame-wise maximum of each feature column.
pub fn max_pool<S: Scalar>(tracklet: &Tracklet<S>) -> Vec<S> {
    let features = &tracklet.features;
    let mut out = features.row(0).to_vec();
    for r in 1..features.rows() {
        for (o, &v) in out.iter_mut().zip(features.row(r)) {
            *o = o.max(v);
        }
    }
    out
}

/// Euclidean distance between two flat pooled vectors.
pub fn euclidean<S: Scalar>(u: &[S], v: &[S]) -> Result<S> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let mut sum = S::zero();
    for (&x, &y) in u.iter().zip(v) {
        let d = x - y;
        sum = sum + d * d;
    }
    Ok(sum.sqrt())
}
