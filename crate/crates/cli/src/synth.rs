//! Seeded synthetic tracklet sets with controlled class structure.

use std::path::Path;

use anyhow::{ensure, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use symtp::io::{save_manifest, save_tracklet_bin, Manifest, ManifestEntry, Split};
use symtp::FrameFeatureMatrix;

/// Class-separation regime of the generator.
#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Classes differ in their per-feature means; frame noise is shared.
    MeanSep,
    /// Classes share every per-feature mean and differ only in spread: class
    /// `c` draws frame noise with deviation `noise · 2^c`.
    VarianceSep,
}

/// Generator parameters. `noise` is the base standard deviation.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub frames: usize,
    pub features: usize,
    pub scheme: Scheme,
    pub noise: f64,
    pub seed: u64,
}

/// Writes `classes · per_class` tracklet files plus `manifest.tsv` into
/// `out`. Within a class, even tracklet indices become queries and odd ones
/// gallery; cameras alternate in pairs. Identical parameters give identical
/// bytes.
pub fn generate(spec: &SynthSpec, out: &Path) -> anyhow::Result<Manifest> {
    ensure!(spec.classes >= 1, "need at least one class");
    ensure!(spec.per_class >= 1, "need at least one tracklet per class");
    ensure!(spec.frames >= 1, "need at least one frame");
    ensure!(spec.features >= 1, "need at least one feature");
    ensure!(
        spec.noise.is_finite() && spec.noise > 0.0,
        "noise must be positive"
    );
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("the unit normal is valid");
    let shared_means: Vec<f64> = (0..spec.features).map(|_| unit.sample(&mut rng)).collect();

    let mut entries = Vec::with_capacity(spec.classes * spec.per_class);
    for c in 0..spec.classes {
        let class_means: Vec<f64> = match spec.scheme {
            Scheme::MeanSep => (0..spec.features).map(|_| unit.sample(&mut rng)).collect(),
            Scheme::VarianceSep => shared_means.clone(),
        };
        let sd = match spec.scheme {
            Scheme::MeanSep => spec.noise,
            Scheme::VarianceSep => spec.noise * 2f64.powi(c as i32),
        };
        let frame_noise = Normal::new(0.0, sd).expect("the deviation is positive");
        for k in 0..spec.per_class {
            let mut data = Vec::with_capacity(spec.frames * spec.features);
            for _ in 0..spec.frames {
                for mean in &class_means {
                    data.push(mean + frame_noise.sample(&mut rng));
                }
            }
            let matrix = FrameFeatureMatrix::new(spec.frames, spec.features, data)?;
            let id = format!("t{c:02}_{k:02}");
            let file = format!("{id}.bin");
            save_tracklet_bin(&out.join(&file), &matrix)?;
            entries.push(ManifestEntry {
                tracklet_id: id,
                identity: format!("id{c:02}"),
                camera: Some(format!("c{}", (k / 2) % 2)),
                split: if k % 2 == 0 { Split::Query } else { Split::Gallery },
                path: file,
            });
        }
    }

    let manifest = Manifest {
        feature_dim: spec.features,
        entries,
    };
    save_manifest(&out.join("manifest.tsv"), &manifest)?;
    Ok(manifest)
}
