//! Implementations behind the `symtp` subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symtp::io::{
    load_manifest, load_representation, load_tracklet_bin, load_tracklet_csv, resolve_path,
    save_distance_matrix, save_manifest, save_representation, Manifest, ManifestEntry, Split,
};
use symtp::{
    batch_hard_mine, distance_matrix, evaluate, pool_tracklet, rank_distances, BinPolicy,
    EvalProtocol, FeatureHistogram, FrameFeatureMatrix64, LabeledRep, PoolingConfig,
    QuantileFunction, SymbolicRepresentation, SymbolicRepresentation64, Tracklet,
};

use crate::{
    synth as synthmod, BenchArgs, DistArgs, EvalArgs, LossArgs, MiningStrategy, PoolArgs,
    RankArgs, SynthArgs,
};

pub fn pool(args: &PoolArgs) -> anyhow::Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let config = PoolingConfig {
        bins: args.bins,
        t_samples: args.t_samples as usize,
    };
    config.validate()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut pooled_entries = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        ensure!(
            !entry.tracklet_id.contains(['/', '\\']),
            "tracklet id {:?} cannot name a representation file",
            entry.tracklet_id
        );
        let source = resolve_path(&args.manifest, &entry.path);
        let matrix = load_frames(&source, manifest.feature_dim)?;
        let tracklet = Tracklet::new(entry.tracklet_id.clone(), entry.camera.clone(), matrix);
        let rep = pool_tracklet(&tracklet, &config)?;
        let file = format!("{}.rep", entry.tracklet_id);
        save_representation(&args.out.join(&file), &rep)?;
        pooled_entries.push(ManifestEntry {
            path: file,
            ..entry.clone()
        });
    }
    let pooled = Manifest {
        feature_dim: manifest.feature_dim,
        entries: pooled_entries,
    };
    save_manifest(&args.out.join("manifest.tsv"), &pooled)?;

    let policy = match args.bins {
        BinPolicy::SqrtFrames => "sqrt".to_string(),
        BinPolicy::Fixed(h) => h.to_string(),
    };
    println!(
        "pooled {} tracklets: M={}, bins={}, T={}",
        pooled.entries.len(),
        pooled.feature_dim,
        policy,
        args.t_samples
    );
    Ok(())
}

fn load_frames(path: &Path, expected_cols: usize) -> anyhow::Result<FrameFeatureMatrix64> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let matrix = if ext == "bin" {
        load_tracklet_bin(path)?
    } else {
        load_tracklet_csv(path, expected_cols)?
    };
    Ok(matrix)
}

fn load_rep_dir(dir: &Path) -> anyhow::Result<(Vec<String>, Vec<SymbolicRepresentation64>)> {
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry.with_context(|| format!("reading {}", dir.display()))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("rep") {
            paths.push(path);
        }
    }
    paths.sort();
    ensure!(!paths.is_empty(), "no .rep files in {}", dir.display());

    let mut ids = Vec::with_capacity(paths.len());
    let mut reps = Vec::with_capacity(paths.len());
    for path in &paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("unreadable file name {}", path.display()))?;
        ids.push(stem.to_string());
        reps.push(load_representation(path)?);
    }
    Ok((ids, reps))
}

pub fn dist(args: &DistArgs) -> anyhow::Result<()> {
    let (query_ids, queries) = load_rep_dir(&args.query)?;
    let (gallery_ids, gallery) = load_rep_dir(&args.gallery)?;
    let matrix = distance_matrix(&queries, &gallery, args.mode)?;
    save_distance_matrix(&args.out, &matrix, &query_ids, &gallery_ids)?;
    println!(
        "wrote {}x{} {} distances to {}",
        matrix.rows(),
        matrix.cols(),
        args.mode,
        args.out.display()
    );
    Ok(())
}

pub fn rank(args: &RankArgs) -> anyhow::Result<()> {
    let (query_ids, queries) = load_rep_dir(&args.query)?;
    let (gallery_ids, gallery) = load_rep_dir(&args.gallery)?;
    let matrix = distance_matrix(&queries, &gallery, args.mode)?;
    let top = args.top.min(gallery_ids.len());
    for (q, query_id) in query_ids.iter().enumerate() {
        let ranking = rank_distances(query_id, &gallery_ids, matrix.row(q))?;
        let line: Vec<String> = ranking.ranked()[..top]
            .iter()
            .map(|item| format!("{}:{:.6}", item.id, item.distance))
            .collect();
        println!("{query_id}\t{}", line.join(" "));
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let mut queries: Vec<LabeledRep<f64>> = Vec::new();
    let mut gallery: Vec<LabeledRep<f64>> = Vec::new();
    for entry in &manifest.entries {
        let as_query = args.self_retrieval || entry.split == Split::Query;
        let as_gallery = args.self_retrieval || entry.split == Split::Gallery;
        if !as_query && !as_gallery {
            continue;
        }
        let rep = load_representation(&resolve_path(&args.manifest, &entry.path))?;
        let labeled = LabeledRep {
            rep,
            id: entry.identity.clone(),
            camera: entry.camera.clone(),
        };
        if as_query && as_gallery {
            queries.push(labeled.clone());
            gallery.push(labeled);
        } else if as_query {
            queries.push(labeled);
        } else {
            gallery.push(labeled);
        }
    }

    let protocol = EvalProtocol {
        mode: args.mode,
        cmc_ranks: args.cmc_ranks.clone(),
        with_map: args.map,
        exclude_same_camera: args.exclude_same_camera,
    };
    let report = evaluate(&queries, &gallery, &protocol)?;

    println!(
        "evaluated {} queries against {} gallery items ({} skipped)",
        queries.len(),
        gallery.len(),
        report.skipped_queries
    );
    for point in &report.cmc {
        println!("rank-{}\t{:.4}", point.rank, point.rate);
    }
    if let Some(map) = report.map {
        println!("mAP\t{map:.4}");
    }
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report).context("serializing the report")?;
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn loss(args: &LossArgs) -> anyhow::Result<()> {
    let (ids, reps) = load_rep_dir(&args.reps)?;
    let text = fs::read_to_string(&args.labels)
        .with_context(|| format!("reading {}", args.labels.display()))?;
    let mut table: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(identity), None) = (fields.next(), fields.next(), fields.next())
        else {
            bail!(
                "{}:{}: expected `tracklet_id<TAB>identity`",
                args.labels.display(),
                lineno + 1
            );
        };
        if table.insert(id.to_string(), identity.to_string()).is_some() {
            bail!(
                "{}:{}: duplicate label for {id:?}",
                args.labels.display(),
                lineno + 1
            );
        }
    }
    let labels = ids
        .iter()
        .map(|id| {
            table
                .get(id)
                .cloned()
                .with_context(|| format!("no label for representation {id:?}"))
        })
        .collect::<anyhow::Result<Vec<String>>>()?;

    let MiningStrategy::BatchHard = args.mine;
    let triplets = batch_hard_mine(&reps, &labels, args.margin, args.mode)?;
    let mut total = 0.0;
    for t in &triplets {
        total += t.loss;
        println!(
            "{}\tpositive={}\tnegative={}\tloss={:.6}",
            ids[t.anchor], ids[t.positive], ids[t.negative], t.loss
        );
    }
    println!("mean loss\t{:.6}", total / triplets.len() as f64);
    Ok(())
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = synthmod::SynthSpec {
        classes: args.classes,
        per_class: args.tracklets_per_class,
        frames: args.frames,
        features: args.features,
        scheme: args.scheme,
        noise: args.noise,
        seed: args.seed,
    };
    let manifest = synthmod::generate(&spec, &args.out)?;
    println!(
        "wrote {} tracklets ({} frames x {} features) to {}",
        manifest.entries.len(),
        args.frames,
        args.features,
        args.out.display()
    );
    Ok(())
}

fn bench_rep(rng: &mut ChaCha8Rng, features: usize, t_samples: usize) -> SymbolicRepresentation64 {
    let per_feature = (0..features)
        .map(|_| {
            let lo = rng.random_range(-2.0..2.0);
            let span = rng.random_range(0.5..2.0);
            let mut weights: Vec<f64> = (0..8).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let hist = FeatureHistogram::from_parts(lo, lo + span, weights)
                .expect("drawn masses form a histogram");
            QuantileFunction::new(hist)
        })
        .collect();
    SymbolicRepresentation::new(per_feature, t_samples).expect("drawn features are valid")
}

pub fn bench(args: &BenchArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let workers = threads.unwrap_or(4).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let queries: Vec<_> = (0..args.q).map(|_| bench_rep(&mut rng, args.m, args.t)).collect();
    let gallery: Vec<_> = (0..args.g).map(|_| bench_rep(&mut rng, args.m, args.t)).collect();
    for rep in queries.iter().chain(&gallery) {
        rep.sampled();
    }
    let pairs = (args.q * args.g) as f64;

    let serial_pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .context("building the serial pool")?;
    let start = Instant::now();
    let serial = serial_pool.install(|| distance_matrix(&queries, &gallery, args.mode))?;
    let serial_time = start.elapsed().as_secs_f64();

    let wide_pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building the worker pool")?;
    let start = Instant::now();
    let parallel = wide_pool.install(|| distance_matrix(&queries, &gallery, args.mode))?;
    let parallel_time = start.elapsed().as_secs_f64();

    let identical = serial
        .data()
        .iter()
        .zip(parallel.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    if !identical {
        bail!("parallel distances differ from the serial run");
    }
    println!("serial\t{serial_time:.3} s\t{:.0} pairs/s", pairs / serial_time);
    println!(
        "{workers} workers\t{parallel_time:.3} s\t{:.0} pairs/s",
        pairs / parallel_time
    );
    println!("speedup\t{:.2}x", serial_time / parallel_time);
    println!("parallel output is bit-identical to serial");
    Ok(())
}
