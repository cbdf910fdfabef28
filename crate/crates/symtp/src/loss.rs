//! Triplet losses over representation distances and batch-hard mining.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metric::{distance_matrix, rep_distance, DistanceMode};
use crate::scalar::Scalar;
use crate::types::SymbolicRepresentation;

/// Hinge triplet loss `max(margin + d_ap - d_an, 0)`.
///
/// The difference is taken before the margin is added, so equal distances
/// give back exactly `margin`.
pub fn triplet_loss<S: Scalar>(d_ap: S, d_an: S, margin: S) -> S {
    (margin + (d_ap - d_an)).max(S::zero())
}

/// Triplet loss where both distances are Wasserstein distances between
/// pooled representations.
pub fn symbolic_triplet_loss<S: Scalar>(
    anchor: &SymbolicRepresentation<S>,
    positive: &SymbolicRepresentation<S>,
    negative: &SymbolicRepresentation<S>,
    margin: S,
    mode: DistanceMode,
) -> Result<S> {
    let d_ap = rep_distance(anchor, positive, mode)?;
    let d_an = rep_distance(anchor, negative, mode)?;
    Ok(triplet_loss(d_ap, d_an, margin))
}

/// One mined triplet: indices into the batch plus the resulting loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet<S: Scalar> {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub loss: S,
}

/// Batch-hard mining: every batch element becomes an anchor paired with its
/// farthest same-label element and its nearest other-label element.
///
/// Ties pick the lowest index, so the result is fully determined by the
/// distance matrix. Triplets come back in anchor order.
pub fn batch_hard_mine<S: Scalar>(
    reps: &[SymbolicRepresentation<S>],
    labels: &[String],
    margin: S,
    mode: DistanceMode,
) -> Result<Vec<Triplet<S>>> {
    if reps.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} representations but {} labels",
            reps.len(),
            labels.len()
        )));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for label in labels {
        *counts.entry(label).or_insert(0) += 1;
    }
    if counts.len() < 2 {
        return Err(Error::InsufficientLabels(counts.len()));
    }
    for label in labels {
        if counts[label.as_str()] < 2 {
            return Err(Error::SingletonLabel(label.clone()));
        }
    }

    let dm = distance_matrix(reps, reps, mode)?;
    let mut triplets = Vec::with_capacity(reps.len());
    for a in 0..reps.len() {
        let mut hardest_pos: Option<(usize, S)> = None;
        let mut hardest_neg: Option<(usize, S)> = None;
        for j in 0..reps.len() {
            let d = dm.get(a, j);
            if labels[j] == labels[a] {
                if j != a && hardest_pos.is_none_or(|(_, best)| d > best) {
                    hardest_pos = Some((j, d));
                }
            } else if hardest_neg.is_none_or(|(_, best)| d < best) {
                hardest_neg = Some((j, d));
            }
        }
        let (positive, d_ap) = hardest_pos.expect("every label has at least two members");
        let (negative, d_an) = hardest_neg.expect("at least two distinct labels");
        triplets.push(Triplet {
            anchor: a,
            positive,
            negative,
            loss: triplet_loss(d_ap, d_an, margin),
        });
    }
    Ok(triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FeatureHistogram, QuantileFunction};

    fn point_mass(at: f64) -> SymbolicRepresentation<f64> {
        let q = QuantileFunction::new(FeatureHistogram::from_parts(at, at, vec![1.0]).unwrap());
        SymbolicRepresentation::new(vec![q], 4).unwrap()
    }

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hinge_closed_forms() {
        assert_eq!(triplet_loss(2.0, 1.0, 0.3), 0.3 + (2.0 - 1.0));
        assert_eq!(triplet_loss(1.0, 2.0, 0.3), 0.0);
        // Exactly at the margin the hinge closes.
        assert_eq!(triplet_loss(1.0, 1.25, 0.25), 0.0);
        assert_eq!(triplet_loss(1.0, 1.0, 0.0), 0.0);
        // Equal distances give back the margin itself.
        assert_eq!(triplet_loss(2.0, 2.0, 0.3), 0.3);
        assert_eq!(triplet_loss(1000.0, 1000.0, 0.3), 0.3);
    }

    #[test]
    fn symbolic_loss_uses_wasserstein_distances() {
        let anchor = point_mass(0.0);
        let positive = point_mass(1.0);
        assert_eq!(
            symbolic_triplet_loss(&anchor, &positive, &point_mass(3.0), 0.25, DistanceMode::Exact)
                .unwrap(),
            0.0
        );
        assert_eq!(
            symbolic_triplet_loss(&anchor, &positive, &point_mass(0.5), 0.25, DistanceMode::Exact)
                .unwrap(),
            0.75
        );
    }

    #[test]
    fn batch_hard_selects_extreme_pairs() {
        let reps = vec![
            point_mass(0.0),
            point_mass(2.0),
            point_mass(3.0),
            point_mass(10.0),
        ];
        let labels = labels(&["a", "a", "b", "b"]);
        let mined = batch_hard_mine(&reps, &labels, 0.3, DistanceMode::Exact).unwrap();
        let picks: Vec<_> = mined
            .iter()
            .map(|t| (t.anchor, t.positive, t.negative, t.loss))
            .collect();
        assert_eq!(
            picks,
            vec![
                (0, 1, 2, 0.0),
                (1, 0, 2, 0.3 + (2.0 - 1.0)),
                (2, 3, 1, 0.3 + (7.0 - 1.0)),
                (3, 2, 1, 0.0),
            ]
        );
    }

    #[test]
    fn ties_resolve_to_the_lowest_index() {
        let reps = vec![
            point_mass(5.0),
            point_mass(5.0),
            point_mass(5.0),
            point_mass(9.0),
            point_mass(9.0),
        ];
        let labels = labels(&["a", "a", "a", "b", "b"]);
        let mined = batch_hard_mine(&reps, &labels, 0.0, DistanceMode::Sampled).unwrap();
        assert_eq!((mined[0].positive, mined[0].negative), (1, 3));
        assert_eq!((mined[1].positive, mined[1].negative), (0, 3));
        assert_eq!((mined[2].positive, mined[2].negative), (0, 3));
    }

    #[test]
    fn label_structure_is_validated() {
        let reps = vec![point_mass(0.0), point_mass(1.0), point_mass(2.0)];
        assert_eq!(
            batch_hard_mine(&reps, &labels(&["a", "a", "a"]), 0.3, DistanceMode::Exact)
                .unwrap_err(),
            Error::InsufficientLabels(1)
        );
        assert_eq!(
            batch_hard_mine(&reps, &labels(&["a", "a", "b"]), 0.3, DistanceMode::Exact)
                .unwrap_err(),
            Error::SingletonLabel("b".into())
        );
        assert!(matches!(
            batch_hard_mine(&reps[..2], &labels(&["a"]), 0.3, DistanceMode::Exact).unwrap_err(),
            Error::ShapeMismatch(_)
        ));
        let none: Vec<SymbolicRepresentation<f64>> = vec![];
        assert_eq!(
            batch_hard_mine(&none, &[], 0.3, DistanceMode::Exact).unwrap_err(),
            Error::InsufficientLabels(0)
        );
    }
}
