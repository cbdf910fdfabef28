//! End-to-end tests that drive the installed `symtp` binary through the
//! full pipeline: synth, pool, dist, rank, eval, loss, bench.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use symtp::io::{load_manifest, load_tracklet_bin, Split};
use symtp::{pool_tracklet, BinPolicy, PoolingConfig, Tracklet};

fn symtp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symtp"))
        .args(args)
        .env_remove("SYMTP_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn synth_into(dir: &Path, classes: &str, per_class: &str, frames: &str, features: &str) -> String {
    let output = symtp(&[
        "synth",
        "--classes",
        classes,
        "--tracklets-per-class",
        per_class,
        "--frames",
        frames,
        "--features",
        features,
        "--scheme",
        "mean-sep",
        "--noise",
        "0.05",
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ]);
    stdout_of(&output)
}

#[test]
fn synth_runs_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let first = root.path().join("first");
    let second = root.path().join("second");
    let summary = synth_into(&first, "2", "2", "16", "4");
    assert!(
        summary.contains("wrote 4 tracklets (16 frames x 4 features)"),
        "unexpected summary: {summary}"
    );
    synth_into(&second, "2", "2", "16", "4");

    let mut names: Vec<String> = fs::read_dir(&first)
        .unwrap()
        .map(|entry| entry.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 5, "4 tracklets plus the manifest");
    for name in &names {
        let a = fs::read(first.join(name)).unwrap();
        let b = fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn pool_writes_one_representation_per_entry_and_matches_the_library() {
    let root = tempfile::tempdir().unwrap();
    let raw = root.path().join("raw");
    let pooled = root.path().join("pooled");
    synth_into(&raw, "5", "10", "25", "3");

    let output = symtp(&[
        "pool",
        "--manifest",
        raw.join("manifest.tsv").to_str().unwrap(),
        "--bins",
        "sqrt",
        "--t-samples",
        "32",
        "--out",
        pooled.to_str().unwrap(),
    ]);
    let summary = stdout_of(&output);
    assert!(
        summary.contains("pooled 50 tracklets: M=3, bins=sqrt, T=32"),
        "unexpected summary: {summary}"
    );

    let manifest = load_manifest(&raw.join("manifest.tsv")).unwrap();
    assert_eq!(manifest.entries.len(), 50);
    let config = PoolingConfig {
        bins: BinPolicy::SqrtFrames,
        t_samples: 32,
    };
    for entry in &manifest.entries {
        let rep_path = pooled.join(format!("{}.rep", entry.tracklet_id));
        assert!(rep_path.exists(), "missing representation for {}", entry.tracklet_id);
        let stored = symtp::io::load_representation::<f64>(&rep_path).unwrap();
        let matrix = load_tracklet_bin::<f64>(&raw.join(&entry.path)).unwrap();
        let direct = pool_tracklet(
            &Tracklet::new(entry.tracklet_id.clone(), entry.camera.clone(), matrix),
            &config,
        )
        .unwrap();
        assert_eq!(stored, direct, "{} diverges from the library", entry.tracklet_id);
    }

    let pooled_manifest = load_manifest(&pooled.join("manifest.tsv")).unwrap();
    assert_eq!(pooled_manifest.entries.len(), 50);
    for entry in &pooled_manifest.entries {
        assert!(entry.path.ends_with(".rep"));
    }
}

#[test]
fn zero_samples_is_a_usage_error_with_no_side_effects() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("out");
    let output = symtp(&[
        "pool",
        "--manifest",
        "nowhere.tsv",
        "--t-samples",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "usage errors exit with 2");
    assert!(!out.exists(), "output directory was created before validation");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--t-samples"), "unexpected stderr: {stderr}");
}

#[test]
fn malformed_bin_policy_is_a_usage_error() {
    let output = symtp(&[
        "pool",
        "--manifest",
        "nowhere.tsv",
        "--bins",
        "junk",
        "--out",
        "nowhere",
    ]);
    assert_eq!(output.status.code(), Some(2), "usage errors exit with 2");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("expected `sqrt` or a positive count"),
        "unexpected stderr: {stderr}"
    );
}

#[test]
fn self_retrieval_eval_is_perfect() {
    let root = tempfile::tempdir().unwrap();
    let raw = root.path().join("raw");
    let pooled = root.path().join("pooled");
    synth_into(&raw, "3", "2", "16", "4");
    stdout_of(&symtp(&[
        "pool",
        "--manifest",
        raw.join("manifest.tsv").to_str().unwrap(),
        "--out",
        pooled.to_str().unwrap(),
    ]));

    let report_path = root.path().join("report.json");
    let output = symtp(&[
        "eval",
        "--manifest",
        pooled.join("manifest.tsv").to_str().unwrap(),
        "--self-retrieval",
        "--cmc-ranks",
        "1,3",
        "--map",
        "--report",
        report_path.to_str().unwrap(),
    ]);
    let summary = stdout_of(&output);
    assert!(
        summary.contains("evaluated 6 queries against 6 gallery items (0 skipped)"),
        "unexpected summary: {summary}"
    );
    assert!(summary.contains("rank-1\t1.0000"), "unexpected summary: {summary}");
    assert!(summary.contains("mAP\t1.0000"), "unexpected summary: {summary}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["cmc"][0]["rank"], 1);
    assert_eq!(report["cmc"][0]["rate"], 1.0);
    assert_eq!(report["map"], 1.0);
}

#[test]
fn distance_files_do_not_depend_on_worker_count() {
    let root = tempfile::tempdir().unwrap();
    let raw = root.path().join("raw");
    let pooled = root.path().join("pooled");
    synth_into(&raw, "2", "4", "16", "4");
    stdout_of(&symtp(&[
        "pool",
        "--manifest",
        raw.join("manifest.tsv").to_str().unwrap(),
        "--out",
        pooled.to_str().unwrap(),
    ]));

    let run = |threads: &str, out: &Path| {
        let output = symtp(&[
            "dist",
            "--query",
            pooled.to_str().unwrap(),
            "--gallery",
            pooled.to_str().unwrap(),
            "--mode",
            "sampled",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        let summary = stdout_of(&output);
        assert!(summary.contains("wrote 8x8 sampled distances"), "unexpected: {summary}");
    };
    let serial = root.path().join("serial.dist");
    let wide = root.path().join("wide.dist");
    run("1", &serial);
    run("4", &wide);
    assert_eq!(
        fs::read(&serial).unwrap(),
        fs::read(&wide).unwrap(),
        "distance file depends on the worker count"
    );

    let via_env = root.path().join("env.dist");
    let output = Command::new(env!("CARGO_BIN_EXE_symtp"))
        .args([
            "dist",
            "--query",
            pooled.to_str().unwrap(),
            "--gallery",
            pooled.to_str().unwrap(),
            "--out",
            via_env.to_str().unwrap(),
        ])
        .env("SYMTP_THREADS", "3")
        .output()
        .expect("binary runs");
    stdout_of(&output);
    assert_eq!(
        fs::read(&serial).unwrap(),
        fs::read(&via_env).unwrap(),
        "distance file depends on SYMTP_THREADS"
    );
}

#[test]
fn rank_lists_the_nearest_gallery_items() {
    let root = tempfile::tempdir().unwrap();
    let raw = root.path().join("raw");
    let pooled = root.path().join("pooled");
    synth_into(&raw, "2", "2", "16", "4");
    stdout_of(&symtp(&[
        "pool",
        "--manifest",
        raw.join("manifest.tsv").to_str().unwrap(),
        "--out",
        pooled.to_str().unwrap(),
    ]));

    let output = symtp(&[
        "rank",
        "--query",
        pooled.to_str().unwrap(),
        "--gallery",
        pooled.to_str().unwrap(),
        "--top",
        "2",
    ]);
    let listing = stdout_of(&output);
    let lines: Vec<&str> = listing.lines().collect();
    assert_eq!(lines.len(), 4, "one line per query: {listing}");
    for line in lines {
        let (query, rest) = line.split_once('\t').expect("query column");
        let nearest = rest.split_whitespace().next().expect("at least one hit");
        let (id, distance) = nearest.split_once(':').expect("id:distance pairs");
        assert_eq!(id, query, "self-distance 0 puts each query first");
        assert_eq!(distance.parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn loss_reports_a_parseable_mean() {
    let root = tempfile::tempdir().unwrap();
    let raw = root.path().join("raw");
    let pooled = root.path().join("pooled");
    synth_into(&raw, "2", "2", "16", "4");
    stdout_of(&symtp(&[
        "pool",
        "--manifest",
        raw.join("manifest.tsv").to_str().unwrap(),
        "--out",
        pooled.to_str().unwrap(),
    ]));

    let manifest = load_manifest(&raw.join("manifest.tsv")).unwrap();
    let mut labels = String::from("# tracklet_id\tidentity\n");
    for entry in &manifest.entries {
        labels.push_str(&format!("{}\t{}\n", entry.tracklet_id, entry.identity));
    }
    let labels_path = root.path().join("labels.tsv");
    fs::write(&labels_path, labels).unwrap();

    let output = symtp(&[
        "loss",
        "--reps",
        pooled.to_str().unwrap(),
        "--labels",
        labels_path.to_str().unwrap(),
        "--margin",
        "0.3",
    ]);
    let listing = stdout_of(&output);
    let mean_line = listing
        .lines()
        .find(|line| line.starts_with("mean loss\t"))
        .expect("mean line present");
    let mean: f64 = mean_line.split('\t').nth(1).unwrap().parse().unwrap();
    assert!(mean.is_finite() && mean >= 0.0, "implausible mean {mean}");
    let triplet_lines = listing.lines().filter(|l| l.contains("positive=")).count();
    assert_eq!(triplet_lines, 4, "one triplet per anchor: {listing}");
}

#[test]
fn bench_checks_parallel_output_against_serial() {
    let output = symtp(&[
        "bench", "--q", "8", "--g", "8", "--m", "4", "--t", "8",
    ]);
    let summary = stdout_of(&output);
    assert!(summary.contains("serial\t"), "unexpected summary: {summary}");
    assert!(summary.contains("speedup\t"), "unexpected summary: {summary}");
    assert!(
        summary.contains("parallel output is bit-identical to serial"),
        "unexpected summary: {summary}"
    );
}

#[test]
fn manifest_splits_drive_the_evaluation() {
    let root = tempfile::tempdir().unwrap();
    let raw = root.path().join("raw");
    let pooled = root.path().join("pooled");
    synth_into(&raw, "3", "4", "16", "4");
    stdout_of(&symtp(&[
        "pool",
        "--manifest",
        raw.join("manifest.tsv").to_str().unwrap(),
        "--out",
        pooled.to_str().unwrap(),
    ]));

    let manifest = load_manifest(&pooled.join("manifest.tsv")).unwrap();
    let queries = manifest.entries.iter().filter(|e| e.split == Split::Query).count();
    let gallery = manifest.entries.iter().filter(|e| e.split == Split::Gallery).count();
    assert_eq!((queries, gallery), (6, 6));

    let output = symtp(&[
        "eval",
        "--manifest",
        pooled.join("manifest.tsv").to_str().unwrap(),
        "--cmc-ranks",
        "1,5",
    ]);
    let summary = stdout_of(&output);
    assert!(
        summary.contains("evaluated 6 queries against 6 gallery items"),
        "unexpected summary: {summary}"
    );
    assert!(summary.contains("rank-1\t"), "unexpected summary: {summary}");
    assert!(summary.contains("rank-5\t"), "unexpected summary: {summary}");
}
