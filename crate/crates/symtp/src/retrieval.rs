//! Gallery ranking, CMC curves, mean average precision and the end-to-end
//! evaluation protocol.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{distance_matrix, rep_distance, DistanceMode};
use crate::scalar::Scalar;
use crate::types::SymbolicRepresentation;

/// One gallery entry in a ranked list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedItem<S: Scalar> {
    /// Position of the item in the original gallery slice.
    pub gallery_index: usize,
    pub id: String,
    pub distance: S,
}

/// A query's gallery ranking, nearest first. An item is relevant when its id
/// equals the query id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult<S: Scalar> {
    query_id: String,
    ranked: Vec<RankedItem<S>>,
    relevant_count: usize,
}

impl<S: Scalar> RetrievalResult<S> {
    /// Wraps an already sorted ranking, rejecting out-of-order distances.
    pub fn new(query_id: impl Into<String>, ranked: Vec<RankedItem<S>>) -> Result<Self> {
        let query_id = query_id.into();
        for (i, pair) in ranked.windows(2).enumerate() {
            if pair[1].distance < pair[0].distance {
                return Err(Error::UnsortedRanking(i + 1));
            }
        }
        let relevant_count = ranked.iter().filter(|item| item.id == query_id).count();
        Ok(Self {
            query_id,
            ranked,
            relevant_count,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn ranked(&self) -> &[RankedItem<S>] {
        &self.ranked
    }

    pub fn relevant_count(&self) -> usize {
        self.relevant_count
    }

    /// 1-based position of the first relevant item, if any.
    pub fn first_relevant(&self) -> Option<usize> {
        self.ranked
            .iter()
            .position(|item| item.id == self.query_id)
            .map(|p| p + 1)
    }
}

/// Sorts a precomputed distance row into a ranking. Ties break toward the
/// lower gallery index, so the order is fully deterministic.
pub fn rank_distances<S: Scalar>(
    query_id: &str,
    gallery_ids: &[String],
    distances: &[S],
) -> Result<RetrievalResult<S>> {
    if gallery_ids.is_empty() {
        return Err(Error::EmptyGallerySet);
    }
    if gallery_ids.len() != distances.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} gallery ids but {} distances",
            gallery_ids.len(),
            distances.len()
        )));
    }
    for (j, &d) in distances.iter().enumerate() {
        if !d.is_finite() {
            return Err(Error::NonFiniteValue { row: 0, col: j });
        }
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&i, &j| {
        distances[i]
            .partial_cmp(&distances[j])
            .expect("distances are finite")
            .then(i.cmp(&j))
    });
    let ranked = order
        .into_iter()
        .map(|j| RankedItem {
            gallery_index: j,
            id: gallery_ids[j].clone(),
            distance: distances[j],
        })
        .collect();
    RetrievalResult::new(query_id, ranked)
}

/// Ranks the gallery for one query by representation distance.
pub fn rank_gallery<S: Scalar>(
    query: &SymbolicRepresentation<S>,
    query_id: &str,
    gallery: &[SymbolicRepresentation<S>],
    gallery_ids: &[String],
    mode: DistanceMode,
) -> Result<RetrievalResult<S>> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallerySet);
    }
    if gallery.len() != gallery_ids.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} gallery representations but {} ids",
            gallery.len(),
            gallery_ids.len()
        )));
    }
    let distances = gallery
        .iter()
        .map(|g| rep_distance(query, g, mode))
        .collect::<Result<Vec<S>>>()?;
    rank_distances(query_id, gallery_ids, &distances)
}

/// One point of a cumulative match characteristic curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CmcPoint {
    pub rank: usize,
    pub rate: f64,
}

/// CMC rates at the requested ranks: the fraction of queries whose first
/// relevant item appears at or before each rank.
///
/// Queries without a single relevant item carry no signal here and are left
/// out of the denominator; [`evaluate`] reports how many were skipped.
pub fn cmc<S: Scalar>(results: &[RetrievalResult<S>], ranks: &[usize]) -> Result<Vec<CmcPoint>> {
    if results.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    let evaluated: Vec<&RetrievalResult<S>> =
        results.iter().filter(|r| r.relevant_count() > 0).collect();
    let Some(first) = evaluated.first() else {
        return Err(Error::NoRelevantItems(results[0].query_id().to_string()));
    };
    let min_gallery = evaluated
        .iter()
        .map(|r| r.ranked().len())
        .min()
        .unwrap_or(first.ranked().len());
    for &rank in ranks {
        if rank == 0 {
            return Err(Error::ZeroRank);
        }
        if rank > min_gallery {
            return Err(Error::RankExceedsGallery {
                rank,
                gallery: min_gallery,
            });
        }
    }
    let positions: Vec<usize> = evaluated
        .iter()
        .map(|r| r.first_relevant().expect("filtered to relevant results"))
        .collect();
    let denom = evaluated.len() as f64;
    Ok(ranks
        .iter()
        .map(|&rank| CmcPoint {
            rank,
            rate: positions.iter().filter(|&&p| p <= rank).count() as f64 / denom,
        })
        .collect())
}

/// Mean average precision over all queries.
///
/// A query with no relevant gallery item has an undefined average precision;
/// that is reported as an error rather than silently skipped, since it almost
/// always means a mislabeled manifest.
pub fn mean_average_precision<S: Scalar>(results: &[RetrievalResult<S>]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    let mut total = 0.0;
    for result in results {
        if result.relevant_count() == 0 {
            return Err(Error::NoRelevantItems(result.query_id().to_string()));
        }
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (pos0, item) in result.ranked().iter().enumerate() {
            if item.id == result.query_id() {
                hits += 1;
                ap += hits as f64 / (pos0 + 1) as f64;
            }
        }
        total += ap / result.relevant_count() as f64;
    }
    Ok(total / results.len() as f64)
}

/// A pooled representation with its identity and optional camera label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRep<S: Scalar> {
    pub rep: SymbolicRepresentation<S>,
    pub id: String,
    pub camera: Option<String>,
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalProtocol {
    pub mode: DistanceMode,
    pub cmc_ranks: Vec<usize>,
    pub with_map: bool,
    /// Drop gallery items that share the query's camera (only when both sides
    /// carry a camera label).
    pub exclude_same_camera: bool,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            mode: DistanceMode::Sampled,
            cmc_ranks: vec![1, 5, 10, 20],
            with_map: true,
            exclude_same_camera: false,
        }
    }
}

/// Full evaluation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<S: Scalar> {
    pub cmc: Vec<CmcPoint>,
    pub map: Option<f64>,
    pub per_query: Vec<RetrievalResult<S>>,
    /// Queries with no relevant gallery item, skipped by the CMC curve.
    pub skipped_queries: usize,
}

/// Runs the full protocol: one distance matrix, a ranking per query, then the
/// CMC curve and (optionally) mAP.
///
/// The distance matrix and each row ranking are deterministic, so the report
/// does not depend on the worker count.
pub fn evaluate<S: Scalar>(
    queries: &[LabeledRep<S>],
    gallery: &[LabeledRep<S>],
    protocol: &EvalProtocol,
) -> Result<EvalReport<S>> {
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    if gallery.is_empty() {
        return Err(Error::EmptyGallerySet);
    }
    let q_reps: Vec<&SymbolicRepresentation<S>> = queries.iter().map(|q| &q.rep).collect();
    let g_reps: Vec<&SymbolicRepresentation<S>> = gallery.iter().map(|g| &g.rep).collect();
    let dm = distance_matrix(&q_reps, &g_reps, protocol.mode)?;

    let per_query: Vec<RetrievalResult<S>> = queries
        .par_iter()
        .enumerate()
        .map(|(i, query)| {
            let row = dm.row(i);
            let mut candidates: Vec<RankedItem<S>> = Vec::with_capacity(gallery.len());
            for (j, item) in gallery.iter().enumerate() {
                let same_camera = query.camera.is_some() && query.camera == item.camera;
                if protocol.exclude_same_camera && same_camera {
                    continue;
                }
                candidates.push(RankedItem {
                    gallery_index: j,
                    id: item.id.clone(),
                    distance: row[j],
                });
            }
            candidates.sort_by(|a, b| {
                a.distance
                    .partial_cmp(&b.distance)
                    .expect("distances are finite")
                    .then(a.gallery_index.cmp(&b.gallery_index))
            });
            RetrievalResult::new(query.id.clone(), candidates)
                .expect("candidates sorted by construction")
        })
        .collect();

    let skipped_queries = per_query
        .iter()
        .filter(|r| r.relevant_count() == 0)
        .count();
    let cmc = cmc(&per_query, &protocol.cmc_ranks)?;
    let map = if protocol.with_map {
        Some(mean_average_precision(&per_query)?)
    } else {
        None
    };
    Ok(EvalReport {
        cmc,
        map,
        per_query,
        skipped_queries,
    })
}
