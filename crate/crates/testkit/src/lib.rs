//! Reference oracles and seeded generators backing the test suites.
//!
//! Every oracle recomputes its answer through deliberately plain code: a
//! straight summation loop, a full sort, an exhaustive enumeration. The
//! library never shares these code paths, so agreement between the two
//! sides is evidence rather than tautology. Everything here runs
//! single-threaded and at small scale.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use symtp::{
    DistanceMode, Error, FeatureHistogram, FeatureHistogram64, QuantileFunction, Result, Scalar,
    SymbolicRepresentation, SymbolicRepresentation64, Triplet,
};

/// Midpoint quadrature of the quantile-difference integral:
/// `(1/steps) · Σ_k |a⁻¹(t_k) − b⁻¹(t_k)|` at `t_k = (k + 0.5)/steps`.
pub fn oracle_w1_quadrature<S: Scalar>(
    a: &QuantileFunction<S>,
    b: &QuantileFunction<S>,
    steps: usize,
) -> S {
    assert!(steps > 0, "quadrature needs at least one midpoint");
    let half = S::from_f64_lossy(0.5);
    let count = S::from_count(steps);
    // Kahan summation: a million terms accumulate without drowning the
    // tolerances this oracle certifies.
    let mut total = S::zero();
    let mut carry = S::zero();
    for k in 0..steps {
        let t = (S::from_count(k) + half) / count;
        let da = a.eval(t).expect("midpoint levels lie inside [0, 1]");
        let db = b.eval(t).expect("midpoint levels lie inside [0, 1]");
        let term = (da - db).abs() - carry;
        let bumped = total + term;
        carry = (bumped - total) - term;
        total = bumped;
    }
    total / count
}

/// Equal-size empirical Wasserstein-1: sort both sample lists and average
/// the absolute positional differences.
pub fn oracle_w1_sorted<S: Scalar>(x: &[S], y: &[S]) -> S {
    assert!(!x.is_empty(), "empty sample lists have no distance");
    assert_eq!(x.len(), y.len(), "sample lists must be the same size");
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("samples must be finite"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("samples must be finite"));
    let mut total = S::zero();
    for (p, q) in xs.iter().zip(&ys) {
        total = total + (*p - *q).abs();
    }
    total / S::from_count(x.len())
}

/// The histogram translated by `c`: bounds and edges move, masses stay.
pub fn shift_histogram<S: Scalar>(h: &FeatureHistogram<S>, c: S) -> FeatureHistogram<S> {
    FeatureHistogram::from_parts(h.lo() + c, h.hi() + c, h.freqs().to_vec())
        .expect("translation keeps a histogram valid")
}

/// The histogram scaled by `s > 0`: bounds and edges stretch, masses stay.
pub fn scale_histogram<S: Scalar>(h: &FeatureHistogram<S>, s: S) -> FeatureHistogram<S> {
    assert!(s > S::zero(), "scale factor must be positive");
    FeatureHistogram::from_parts(h.lo() * s, h.hi() * s, h.freqs().to_vec())
        .expect("positive scaling keeps a histogram valid")
}

/// Exhaustive mining oracle: enumerates every valid (anchor, positive,
/// negative) triple and keeps the per-anchor extremes, lowest index on ties.
pub fn brute_force_mine<S: Scalar>(
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
    let mut distinct: Vec<&str> = Vec::new();
    for label in labels {
        if !distinct.contains(&label.as_str()) {
            distinct.push(label);
        }
    }
    if distinct.len() < 2 {
        return Err(Error::InsufficientLabels(distinct.len()));
    }
    for label in labels {
        if labels.iter().filter(|other| *other == label).count() < 2 {
            return Err(Error::SingletonLabel(label.clone()));
        }
    }

    let mut triplets = Vec::with_capacity(reps.len());
    for a in 0..reps.len() {
        let mut hardest_positive: Option<(usize, S)> = None;
        for p in 0..reps.len() {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            let d = symtp::rep_distance(&reps[a], &reps[p], mode)?;
            if hardest_positive.is_none_or(|(_, best)| d > best) {
                hardest_positive = Some((p, d));
            }
        }
        let mut hardest_negative: Option<(usize, S)> = None;
        for n in 0..reps.len() {
            if labels[n] == labels[a] {
                continue;
            }
            let d = symtp::rep_distance(&reps[a], &reps[n], mode)?;
            if hardest_negative.is_none_or(|(_, best)| d < best) {
                hardest_negative = Some((n, d));
            }
        }
        let (positive, d_ap) = hardest_positive.expect("every label occurs at least twice");
        let (negative, d_an) = hardest_negative.expect("at least two labels are present");
        triplets.push(Triplet {
            anchor: a,
            positive,
            negative,
            loss: (margin + (d_ap - d_an)).max(S::zero()),
        });
    }
    Ok(triplets)
}

/// Deterministic generator stream for seeded test data.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of the histograms drawn by [`random_histogram`].
#[derive(Debug, Clone)]
pub struct HistogramSpec {
    /// Inclusive bin-count range.
    pub bins: (usize, usize),
    /// Base-10 exponent range for the support span.
    pub log10_span: (f64, f64),
    /// The lower bound is drawn from `[-center, center]`.
    pub center: f64,
    /// Smallest weight a non-empty bin receives before normalization.
    pub min_weight: f64,
    /// Chance that any given bin carries zero mass.
    pub empty_bin_probability: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            bins: (1, 16),
            log10_span: (-3.0, 3.0),
            center: 1.0e3,
            min_weight: 0.05,
            empty_bin_probability: 0.2,
        }
    }
}

/// Draws one histogram matching `spec` from the generator stream.
pub fn random_histogram(rng: &mut ChaCha8Rng, spec: &HistogramSpec) -> FeatureHistogram64 {
    let bins = rng.random_range(spec.bins.0..=spec.bins.1);
    let span = 10f64.powf(rng.random_range(spec.log10_span.0..=spec.log10_span.1));
    let lo = rng.random_range(-spec.center..=spec.center);
    let mut weights = vec![0.0f64; bins];
    let mut total = 0.0;
    for w in &mut weights {
        if !rng.random_bool(spec.empty_bin_probability) {
            *w = rng.random_range(spec.min_weight..1.0);
            total += *w;
        }
    }
    if total == 0.0 {
        weights[bins / 2] = 1.0;
        total = 1.0;
    }
    for w in &mut weights {
        *w /= total;
    }
    FeatureHistogram::from_parts(lo, lo + span, weights).expect("drawn masses form a histogram")
}

/// Draws a representation with `features` histograms sampled at `t_samples`.
pub fn random_representation(
    rng: &mut ChaCha8Rng,
    features: usize,
    t_samples: usize,
    spec: &HistogramSpec,
) -> SymbolicRepresentation64 {
    let per_feature = (0..features)
        .map(|_| QuantileFunction::new(random_histogram(rng, spec)))
        .collect();
    SymbolicRepresentation::new(per_feature, t_samples).expect("drawn features are valid")
}

/// Draws `classes`·`per_class` labeled representations in shuffled order, so
/// label runs do not line up with batch positions.
pub fn random_labeled_batch(
    rng: &mut ChaCha8Rng,
    classes: usize,
    per_class: usize,
    features: usize,
    t_samples: usize,
    spec: &HistogramSpec,
) -> (Vec<SymbolicRepresentation64>, Vec<String>) {
    let mut items = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        for _ in 0..per_class {
            let rep = random_representation(rng, features, t_samples, spec);
            items.push((format!("id{c}"), rep));
        }
    }
    items.shuffle(rng);
    let labels = items.iter().map(|(label, _)| label.clone()).collect();
    let reps = items.into_iter().map(|(_, rep)| rep).collect();
    (reps, labels)
}

/// Draws `n` normal samples with the given mean and standard deviation.
pub fn normal_samples(rng: &mut ChaCha8Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    let dist = Normal::new(mean, sd).expect("deviation must be finite and positive");
    (0..n).map(|_| dist.sample(rng)).collect()
}
