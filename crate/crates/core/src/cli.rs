//! Command-line front end: `eval`, `analyze`, `synth` and `sweep`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::episodes::{
    default_sweep_grid, evaluate_tasks, sample_tasks, sweep_extra_labels, EvalOptions, Method,
    ResolvedConfig,
};
use crate::error::{Error, Result};
use crate::featio::{
    load_dataset, save_features, save_labels, write_manifest, write_report, write_sweep_csv,
    Manifest, Split, SplitEntry,
};
use crate::geometry::{estimate_pnn, pairwise_distance_stats, DistanceStats, PnnEstimate};
use crate::synthgen::{generate_sparse_graph_dataset, SynthConfig};

pub const OUT_DIR_ENV: &str = "KPROP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "kprop", version, about = "Few-shot classification with label propagation and kernel PCA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate methods over sampled N-way k-shot tasks.
    Eval(EvalArgs),
    /// Pairwise distance statistics and nearest-neighbor purity.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic chain-structured dataset.
    Synth(SynthArgs),
    /// K-Prop accuracy against the number of propagated labels.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EpisodeArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Classes per task (N).
    #[arg(long = "n", visible_alias = "way", default_value_t = 5)]
    pub way: usize,
    /// Labeled examples per class (k).
    #[arg(long = "k", visible_alias = "shot", default_value_t = 1)]
    pub shot: usize,
    #[arg(long, default_value_t = 1000)]
    pub tasks: usize,
    /// Query points per class.
    #[arg(long = "queries", default_value_t = 15)]
    pub queries_per_class: usize,
    /// Gaussian kernel width.
    #[arg(long, default_value_t = 16.0)]
    pub sigma: f64,
    /// Principal components per class (default floor(2k/3 + 1)).
    #[arg(long = "q")]
    pub components: Option<usize>,
    /// Extra labels per class from propagation (default 4/3/2 for k = 1/2/>=3).
    #[arg(long = "m")]
    pub extra_labels: Option<usize>,
    /// Subspace baseline dimension (default min(k - 1, 4)).
    #[arg(long)]
    pub subspace_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Let propagation claim the task's query points.
    #[arg(long)]
    pub transductive: bool,
    /// L2-normalize feature vectors before use.
    #[arg(long)]
    pub normalize_features: bool,
    /// Worker threads; 0 uses every core. Results do not depend on this.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, env = OUT_DIR_ENV, default_value = "kprop-out")]
    pub out: PathBuf,
}

impl EpisodeArgs {
    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            way: Some(self.way),
            shot: self.shot,
            queries_per_class: Some(self.queries_per_class),
            tasks: Some(self.tasks),
            seed: self.seed,
            sigma: Some(self.sigma),
            components: self.components,
            extra_labels: self.extra_labels,
            subspace_dim: self.subspace_dim,
            transductive: self.transductive,
            normalize_features: self.normalize_features,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub episode: EpisodeArgs,
    /// Comma-separated: kprop, prototype, subspace, linear, prop-linear.
    #[arg(long, default_value = "kprop")]
    pub methods: String,
    /// Also report K-Prop with eigenvectors of the uncentered kernel matrix.
    #[arg(long)]
    pub compare_raw_kernel_eigvecs: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Comma-separated class counts per trial.
    #[arg(long, default_value = "5,10")]
    pub classes: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = OUT_DIR_ENV, default_value = "kprop-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub points_per_class: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Dimension of the subspace the random walks move in.
    #[arg(long, default_value_t = 10)]
    pub walk_dim: usize,
    /// Random-walk step length.
    #[arg(long, default_value_t = 10.0)]
    pub step: f64,
    /// Radius of the ball holding class anchors.
    #[arg(long, default_value_t = 10.0, conflicts_with = "ratio")]
    pub dispersion: f64,
    /// Step-to-dispersion ratio; sets dispersion = step / ratio.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Random walks grown from each class anchor.
    #[arg(long, default_value_t = 25)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = OUT_DIR_ENV, default_value = "kprop-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub episode: EpisodeArgs,
    /// Comma-separated extra-label counts (default 0..=10, 15, 20, ..., 100).
    #[arg(long = "m-values")]
    pub m_values: Option<String>,
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("--{flag}: cannot parse '{t}'")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("--{flag}: empty list")));
    }
    Ok(items)
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let mut out: Vec<Method> = Vec::new();
    for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let m: Method = t
            .parse()
            .map_err(|e: Error| Error::Config(format!("--methods: {e}")))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("--methods: empty list".into()));
    }
    Ok(out)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn resolve(opts: &EvalOptions) -> Result<ResolvedConfig> {
    opts.resolve()
}

/// Runs every requested method on one shared task set and writes a report per
/// method. Returns the files written.
pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<PathBuf>> {
    let mut methods = parse_methods(&args.methods)?;
    if args.compare_raw_kernel_eigvecs && !methods.contains(&Method::KPropRawKernel) {
        methods.push(Method::KPropRawKernel);
    }
    let cfg = resolve(&args.episode.options())?;
    let data = load_dataset(&args.episode.manifest)?.into_episode_data()?;
    let tasks = sample_tasks(&data, &cfg)?;
    let dataset = args.episode.manifest.display().to_string();

    let mut written = Vec::new();
    println!(
        "{}-way {}-shot, {} tasks, sigma={}, q={}, M={}",
        cfg.way, cfg.shot, cfg.tasks, cfg.sigma, cfg.components, cfg.extra_labels
    );
    println!("{:<14} {:>8} {:>7}", "method", "mean %", "SE %");
    for method in methods {
        let report = evaluate_tasks(method, &cfg, &tasks, &data, args.episode.workers)?;
        println!(
            "{:<14} {:>8.2} {:>7.2}",
            method.id(),
            100.0 * report.mean,
            100.0 * report.se
        );
        let (json, csv) = write_report(&report, Some(&dataset), &args.episode.out, method.id())?;
        written.push(json);
        written.push(csv);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub dataset: String,
    pub split: &'static str,
    pub seed: u64,
    pub distance_stats: DistanceStats,
    pub pnn: Vec<PnnEstimate>,
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Vec<PathBuf>> {
    let class_counts: Vec<usize> = parse_list("classes", &args.classes)?;
    if args.trials == 0 {
        return Err(Error::Config("--trials must be positive".into()));
    }
    let loaded = load_dataset(&args.manifest)?;
    let split = if loaded.train.is_some() { "train" } else { "test" };
    let data = loaded
        .analysis_split()
        .ok_or_else(|| Error::EmptySet("manifest names no splits".into()))?;
    let stats = pairwise_distance_stats(&data.features, &data.labels)?;
    let available = data.num_classes();
    let mut pnn = Vec::new();
    for c in class_counts {
        if c > available {
            eprintln!("skipping p_NN at {c} classes: dataset has only {available}");
            continue;
        }
        pnn.push(estimate_pnn(&data.features, &data.labels, c, args.trials, args.seed)?);
    }
    if pnn.is_empty() {
        return Err(Error::Config(format!(
            "--classes: no requested class count fits the {available} classes present"
        )));
    }

    println!(
        "intra-class distance {:.3} ± {:.3} ({} pairs)",
        stats.intra_mean, stats.intra_sd, stats.intra_count
    );
    println!(
        "inter-class distance {:.3} ± {:.3} ({} pairs)",
        stats.inter_mean, stats.inter_sd, stats.inter_count
    );
    for e in &pnn {
        println!(
            "p_NN at {:>2} classes: {:.2} ± {:.2} % ({} trials)",
            e.classes_per_trial,
            100.0 * e.mean,
            100.0 * e.sd,
            e.trials
        );
    }

    ensure_dir(&args.out)?;
    let json = args.out.join("analysis.json");
    write_json(
        &json,
        &AnalysisReport {
            dataset: args.manifest.display().to_string(),
            split,
            seed: args.seed,
            distance_stats: stats,
            pnn: pnn.clone(),
        },
    )?;
    let csv = args.out.join("pnn.csv");
    let mut text = String::from("classes_per_trial,trials,mean,sd\n");
    for e in &pnn {
        text.push_str(&format!("{},{},{:?},{:?}\n", e.classes_per_trial, e.trials, e.mean, e.sd));
    }
    fs::write(&csv, text).map_err(|e| Error::io(&csv, e))?;
    Ok(vec![json, csv])
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub config: SynthConfig,
    pub achieved_pnn: f64,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    let cfg = SynthConfig {
        classes: args.classes,
        points_per_class: args.points_per_class,
        dim: args.dim,
        walk_dim: args.walk_dim,
        step: args.step,
        dispersion: args.ratio.map_or(args.dispersion, |r| args.step / r),
        chains_per_class: args.chains,
        seed: args.seed,
    };
    let synth = generate_sparse_graph_dataset(&cfg)?;
    ensure_dir(&args.out)?;
    let features = args.out.join("features.npy");
    let labels = args.out.join("labels.npy");
    let manifest = args.out.join("manifest.json");
    let summary = args.out.join("synth.json");
    save_features(&features, &synth.features)?;
    save_labels(&labels, &synth.labels)?;
    write_manifest(
        &manifest,
        &Manifest::Splits(vec![SplitEntry {
            features: "features.npy".into(),
            labels: "labels.npy".into(),
            split: Split::Train,
            class_names: None,
        }]),
    )?;
    write_json(
        &summary,
        &SynthSummary {
            config: cfg.clone(),
            achieved_pnn: synth.achieved_pnn,
        },
    )?;
    println!(
        "{} points, {} classes, d={}, step/dispersion={:.4}: achieved p_NN = {:.4}",
        synth.labels.len(),
        cfg.classes,
        cfg.dim,
        cfg.step / cfg.dispersion,
        synth.achieved_pnn
    );
    Ok(vec![features, labels, manifest, summary])
}

#[derive(Debug, Clone, Serialize)]
struct SweepSummary<'a> {
    dataset: String,
    config: &'a ResolvedConfig,
    points: &'a [crate::episodes::SweepPoint],
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<PathBuf>> {
    let grid = match &args.m_values {
        Some(s) => parse_list("m-values", s)?,
        None => default_sweep_grid(),
    };
    let cfg = resolve(&args.episode.options())?;
    let data = load_dataset(&args.episode.manifest)?.into_episode_data()?;
    let points = sweep_extra_labels(&data, &cfg, &grid, args.episode.workers)?;
    println!("{:>4} {:>8} {:>7}", "M", "mean %", "SE %");
    for p in &points {
        println!("{:>4} {:>8.2} {:>7.2}", p.extra_labels, 100.0 * p.mean, 100.0 * p.se);
    }
    ensure_dir(&args.episode.out)?;
    let csv = args.episode.out.join("sweep.csv");
    write_sweep_csv(&points, &csv)?;
    let json = args.episode.out.join("sweep.json");
    write_json(
        &json,
        &SweepSummary {
            dataset: args.episode.manifest.display().to_string(),
            config: &cfg,
            points: &points,
        },
    )?;
    Ok(vec![csv, json])
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}
