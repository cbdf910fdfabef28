//! Command-line front door for the `symtp` library: pool tracklets into
//! symbolic representations, compute Wasserstein distance matrices, rank and
//! evaluate retrieval, mine triplet losses, generate synthetic datasets, and
//! benchmark the distance kernel.

pub mod ops;
pub mod synth;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use symtp::{BinPolicy, DistanceMode};

#[derive(Parser, Debug)]
#[command(name = "symtp")]
#[command(about = "Symbolic temporal pooling: distribution-valued tracklet representations")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for the distance kernel (default: SYMTP_THREADS, then
    /// all cores). Results never depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pool the tracklets of a manifest into symbolic representations.
    Pool(PoolArgs),
    /// Compute the query-by-gallery distance matrix between two sets.
    Dist(DistArgs),
    /// Print the ranked gallery list for every query.
    Rank(RankArgs),
    /// Score retrieval with CMC and mean average precision.
    Eval(EvalArgs),
    /// Mine batch-hard triplets and report their losses.
    Loss(LossArgs),
    /// Generate a seeded synthetic tracklet set.
    Synth(SynthArgs),
    /// Time the distance kernel and check parallel determinism.
    Bench(BenchArgs),
}

#[derive(clap::Args, Debug)]
pub struct PoolArgs {
    /// Manifest listing the tracklets to pool.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Bin policy: `sqrt` or a fixed positive count.
    #[arg(long, default_value = "sqrt", value_parser = parse_bins)]
    pub bins: BinPolicy,

    /// Quantile samples per feature.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub t_samples: u32,

    /// Output directory for the `.rep` files and the pooled manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct DistArgs {
    /// Directory of query `.rep` files.
    #[arg(long)]
    pub query: PathBuf,

    /// Directory of gallery `.rep` files.
    #[arg(long)]
    pub gallery: PathBuf,

    /// Distance mode: `exact` or `sampled`.
    #[arg(long, default_value = "sampled", value_parser = parse_mode)]
    pub mode: DistanceMode,

    /// Output distance-matrix file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct RankArgs {
    /// Directory of query `.rep` files.
    #[arg(long)]
    pub query: PathBuf,

    /// Directory of gallery `.rep` files.
    #[arg(long)]
    pub gallery: PathBuf,

    /// Distance mode: `exact` or `sampled`.
    #[arg(long, default_value = "sampled", value_parser = parse_mode)]
    pub mode: DistanceMode,

    /// Gallery entries printed per query.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    /// Manifest of pooled representations; the split column selects queries
    /// and gallery.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Distance mode: `exact` or `sampled`.
    #[arg(long, default_value = "sampled", value_parser = parse_mode)]
    pub mode: DistanceMode,

    /// CMC ranks to report.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10, 20])]
    pub cmc_ranks: Vec<usize>,

    /// Also report mean average precision.
    #[arg(long)]
    pub map: bool,

    /// Drop gallery items that share the query's camera.
    #[arg(long)]
    pub exclude_same_camera: bool,

    /// Use every entry as both query and gallery, ignoring the split column.
    #[arg(long)]
    pub self_retrieval: bool,

    /// Also write the full report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct LossArgs {
    /// Directory of `.rep` files forming the batch.
    #[arg(long)]
    pub reps: PathBuf,

    /// Tab-separated `tracklet_id<TAB>identity` label file.
    #[arg(long)]
    pub labels: PathBuf,

    /// Triplet margin.
    #[arg(long, default_value_t = 0.3)]
    pub margin: f64,

    /// Mining strategy.
    #[arg(long, value_enum, default_value = "batch-hard")]
    pub mine: MiningStrategy,

    /// Distance mode: `exact` or `sampled`.
    #[arg(long, default_value = "sampled", value_parser = parse_mode)]
    pub mode: DistanceMode,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiningStrategy {
    /// Hardest positive and hardest negative per anchor.
    BatchHard,
}

#[derive(clap::Args, Debug)]
pub struct SynthArgs {
    /// Number of identity classes.
    #[arg(long, default_value_t = 5)]
    pub classes: usize,

    /// Tracklets per class; even indices become queries, odd ones gallery.
    #[arg(long, default_value_t = 4)]
    pub tracklets_per_class: usize,

    /// Frames per tracklet.
    #[arg(long, default_value_t = 64)]
    pub frames: usize,

    /// Features per frame.
    #[arg(long, default_value_t = 16)]
    pub features: usize,

    /// Class-separation regime.
    #[arg(long, value_enum)]
    pub scheme: synth::Scheme,

    /// Base standard deviation of the frame noise.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,

    /// Generator seed; identical parameters give identical bytes.
    #[arg(long, default_value_t = 73)]
    pub seed: u64,

    /// Output directory for the `.bin` files and the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct BenchArgs {
    /// Query count.
    #[arg(long, default_value_t = 1000)]
    pub q: usize,

    /// Gallery count.
    #[arg(long, default_value_t = 1000)]
    pub g: usize,

    /// Features per representation.
    #[arg(long, default_value_t = 128)]
    pub m: usize,

    /// Quantile samples per feature.
    #[arg(long, default_value_t = 64)]
    pub t: usize,

    /// Distance mode: `exact` or `sampled`.
    #[arg(long, default_value = "sampled", value_parser = parse_mode)]
    pub mode: DistanceMode,

    /// Generator seed for the benchmark inputs.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

fn parse_bins(raw: &str) -> Result<BinPolicy, String> {
    if raw == "sqrt" {
        return Ok(BinPolicy::SqrtFrames);
    }
    match raw.parse::<usize>() {
        Ok(h) if h >= 1 => Ok(BinPolicy::Fixed(h)),
        _ => Err(format!("expected `sqrt` or a positive count, got {raw:?}")),
    }
}

fn parse_mode(raw: &str) -> Result<DistanceMode, String> {
    raw.parse::<DistanceMode>().map_err(|e| e.to_string())
}

/// Dispatches a parsed command line; called by `main` and by tests.
pub fn run(args: Args) -> anyhow::Result<()> {
    let threads = match args.threads {
        Some(n) => Some(n),
        None => match std::env::var("SYMTP_THREADS") {
            Ok(raw) => Some(
                raw.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|n| *n >= 1)
                    .context("SYMTP_THREADS must be a positive integer")?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing the worker pool")?;
    }
    match &args.command {
        Command::Pool(a) => ops::pool(a),
        Command::Dist(a) => ops::dist(a),
        Command::Rank(a) => ops::rank(a),
        Command::Eval(a) => ops::eval(a),
        Command::Loss(a) => ops::loss(a),
        Command::Synth(a) => ops::synth(a),
        Command::Bench(a) => ops::bench(a, threads),
    }
}
