//! N-way k-shot episodes: sampling, per-method evaluation, aggregation and the
//! extra-label sweep.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    classify_kprop, classify_linear, default_subspace_dim, train_linear, Prototypes, Subspaces,
};
use crate::dataset::EpisodeData;
use crate::error::{Error, Result};
use crate::kernels::{Kernel, DEFAULT_SIGMA};
use crate::kpca::{default_components, fit_kpca_with_basis, EigenBasis, KpcaModel};
use crate::matrix::FeatureMatrix;
use crate::propagation::{propagate_labels, LabeledSets};
use crate::rng::derive_rng;

pub const DEFAULT_WAY: usize = 5;
pub const DEFAULT_QUERIES_PER_CLASS: usize = 15;
pub const DEFAULT_TASKS: usize = 1000;

/// Extra labels per class: 4 for 1-shot, 3 for 2-shot, 2 otherwise.
pub fn default_extra_labels(shot: usize) -> usize {
    match shot {
        0 | 1 => 4,
        2 => 3,
        _ => 2,
    }
}

/// The extra-label grid `1..=10, 15, 20, ..., 100`, preceded by the `M = 0` baseline.
pub fn default_sweep_grid() -> Vec<usize> {
    (0..=10).chain((15..=100).step_by(5)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Propagation, then per-class kernel PCA reconstruction error.
    #[serde(rename = "kprop")]
    KProp,
    /// As `KProp` but with eigenvectors of the uncentered kernel matrix.
    #[serde(rename = "kprop-rawk")]
    KPropRawKernel,
    #[serde(rename = "prototype")]
    Prototype,
    #[serde(rename = "subspace")]
    Subspace,
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "prop-linear")]
    PropLinear,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::KProp,
        Method::KPropRawKernel,
        Method::Prototype,
        Method::Subspace,
        Method::Linear,
        Method::PropLinear,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Method::KProp => "kprop",
            Method::KPropRawKernel => "kprop-rawk",
            Method::Prototype => "prototype",
            Method::Subspace => "subspace",
            Method::Linear => "linear",
            Method::PropLinear => "prop-linear",
        }
    }

    pub fn propagates(&self) -> bool {
        matches!(self, Method::KProp | Method::KPropRawKernel | Method::PropLinear)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "prop-kpca" {
            return Ok(Method::KProp);
        }
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method '{s}' (expected one of kprop, prototype, subspace, linear, prop-linear)"
                ))
            })
    }
}

/// User-facing knobs; `None` means "use the default for this shot count".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub way: Option<usize>,
    pub shot: usize,
    pub queries_per_class: Option<usize>,
    pub tasks: Option<usize>,
    pub seed: u64,
    pub sigma: Option<f64>,
    pub components: Option<usize>,
    pub extra_labels: Option<usize>,
    pub subspace_dim: Option<usize>,
    pub transductive: bool,
    pub normalize_features: bool,
}

/// Every hyperparameter after defaulting, as recorded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
    pub tasks: usize,
    pub seed: u64,
    pub sigma: f64,
    pub components: usize,
    pub extra_labels: usize,
    pub subspace_dim: usize,
    pub transductive: bool,
    pub normalize_features: bool,
}

impl EvalOptions {
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.shot == 0 {
            return Err(Error::Config("shot (k) must be at least 1".into()));
        }
        let way = self.way.unwrap_or(DEFAULT_WAY);
        if way < 2 {
            return Err(Error::Config(format!("way (N) must be at least 2, got {way}")));
        }
        let sigma = self.sigma.unwrap_or(DEFAULT_SIGMA);
        Kernel::gaussian(sigma)?;
        let tasks = self.tasks.unwrap_or(DEFAULT_TASKS);
        if tasks == 0 {
            return Err(Error::Config("tasks must be positive".into()));
        }
        let queries_per_class = self.queries_per_class.unwrap_or(DEFAULT_QUERIES_PER_CLASS);
        if queries_per_class == 0 {
            return Err(Error::Config("queries per class must be positive".into()));
        }
        Ok(ResolvedConfig {
            way,
            shot: self.shot,
            queries_per_class,
            tasks,
            seed: self.seed,
            sigma,
            components: self.components.unwrap_or_else(|| default_components(self.shot)),
            extra_labels: self.extra_labels.unwrap_or_else(|| default_extra_labels(self.shot)),
            subspace_dim: self.subspace_dim.unwrap_or_else(|| default_subspace_dim(self.shot)),
            transductive: self.transductive,
            normalize_features: self.normalize_features,
        })
    }
}

/// One sampled episode. Support and query lists are indexed by episode class
/// (`0..way`); `classes` maps those back to dataset labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotTask {
    pub way: usize,
    pub shot: usize,
    pub classes: Vec<usize>,
    pub support: Vec<Vec<usize>>,
    pub query: Vec<Vec<usize>>,
    pub pool: Vec<usize>,
    pub seed: u64,
    pub task_index: u64,
}

/// Samples `way` classes uniformly among those with at least
/// `shot + queries_per_class` episode rows, then supports and queries uniformly
/// within each class. The pool is every pool row not used by the episode
/// (queries are added back when `transductive`).
pub fn sample_task(
    data: &EpisodeData,
    way: usize,
    shot: usize,
    queries_per_class: usize,
    transductive: bool,
    seed: u64,
    task_index: u64,
) -> Result<FewShotTask> {
    let need = shot + queries_per_class;
    let by_class = data.episode_rows_by_class();
    let eligible: Vec<(&usize, &Vec<usize>)> =
        by_class.iter().filter(|(_, rows)| rows.len() >= need).collect();
    if eligible.len() < way {
        return Err(Error::Sampling(format!(
            "{way}-way {shot}-shot with {queries_per_class} queries needs {way} classes with >= {need} points; found {}",
            eligible.len()
        )));
    }
    let mut rng = derive_rng(seed, task_index);
    let mut classes = Vec::with_capacity(way);
    let mut support = Vec::with_capacity(way);
    let mut query = Vec::with_capacity(way);
    for pick in index::sample(&mut rng, eligible.len(), way) {
        let (label, rows) = eligible[pick];
        let chosen: Vec<usize> = index::sample(&mut rng, rows.len(), need)
            .into_iter()
            .map(|i| rows[i])
            .collect();
        classes.push(*label);
        support.push(chosen[..shot].to_vec());
        query.push(chosen[shot..].to_vec());
    }
    let used: HashSet<usize> = support
        .iter()
        .flatten()
        .chain(query.iter().flatten().filter(|_| !transductive))
        .copied()
        .collect();
    let mut pool: Vec<usize> = data
        .pool_rows
        .iter()
        .copied()
        .filter(|i| !used.contains(i))
        .collect();
    if transductive {
        pool.extend(query.iter().flatten().copied());
        pool.sort_unstable();
        pool.dedup();
    }
    Ok(FewShotTask {
        way,
        shot,
        classes,
        support,
        query,
        pool,
        seed,
        task_index,
    })
}

pub fn sample_tasks(data: &EpisodeData, cfg: &ResolvedConfig) -> Result<Vec<FewShotTask>> {
    (0..cfg.tasks as u64)
        .map(|t| {
            sample_task(
                data,
                cfg.way,
                cfg.shot,
                cfg.queries_per_class,
                cfg.transductive,
                cfg.seed,
                t,
            )
        })
        .collect()
}

enum Fitted {
    Kpca(Vec<KpcaModel>),
    Prototype(Prototypes),
    Subspace(Subspaces),
    Linear(crate::classifiers::LinearModel),
}

impl Fitted {
    fn predict(&self, z: &[f64]) -> Result<usize> {
        let v = match self {
            Fitted::Kpca(models) => classify_kprop(models, z)?,
            Fitted::Prototype(p) => p.classify(z)?,
            Fitted::Subspace(s) => s.classify(z)?,
            Fitted::Linear(m) => classify_linear(m, z)?,
        };
        Ok(v.predicted_class)
    }
}

/// Per-class labeled sets for `task` after propagating `extra_labels` points.
pub fn labeled_sets(
    features: &FeatureMatrix,
    task: &FewShotTask,
    extra_labels: usize,
) -> Result<Vec<Vec<usize>>> {
    let support = LabeledSets::new(task.support.clone())?;
    if extra_labels == 0 {
        return Ok(support.into_inner());
    }
    Ok(propagate_labels(features, &support, &task.pool, extra_labels)?
        .expanded
        .into_inner())
}

/// Accuracy of `method` on the queries of one task.
pub fn evaluate_task(
    method: Method,
    cfg: &ResolvedConfig,
    task: &FewShotTask,
    data: &EpisodeData,
) -> Result<f64> {
    let features = &data.data.features;
    let m = if method.propagates() { cfg.extra_labels } else { 0 };
    let sets = labeled_sets(features, task, m)?;
    let class_points: Vec<FeatureMatrix> = sets.iter().map(|s| features.select_rows(s)).collect();
    let fitted = match method {
        Method::KProp | Method::KPropRawKernel => {
            let basis = if method == Method::KProp {
                EigenBasis::Centered
            } else {
                EigenBasis::Raw
            };
            let kernel = Kernel::gaussian(cfg.sigma)?;
            Fitted::Kpca(
                class_points
                    .iter()
                    .map(|p| fit_kpca_with_basis(p, kernel, cfg.components, basis))
                    .collect::<Result<_>>()?,
            )
        }
        Method::Prototype => Fitted::Prototype(Prototypes::fit(&class_points)?),
        Method::Subspace => Fitted::Subspace(Subspaces::fit(&class_points, cfg.subspace_dim)?),
        Method::Linear | Method::PropLinear => Fitted::Linear(train_linear(&class_points)?),
    };
    let mut correct = 0usize;
    let mut total = 0usize;
    for (c, rows) in task.query.iter().enumerate() {
        for &i in rows {
            if fitted.predict(features.row(i))? == c {
                correct += 1;
            }
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptySet("task has no queries".into()));
    }
    Ok(correct as f64 / total as f64)
}

/// Mean and standard error (sample SD over `sqrt(n)`; zero for one value).
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptySet("cannot aggregate zero accuracies".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt() / n.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub config: ResolvedConfig,
    pub task_count: usize,
    pub mean: f64,
    pub se: f64,
    pub accuracies: Vec<f64>,
}

fn run_parallel<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> Result<T> + Send,
{
    if workers == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}

/// Evaluates `method` on pre-sampled tasks. `workers = 0` uses the global
/// thread pool; the report does not depend on the worker count.
pub fn evaluate_tasks(
    method: Method,
    cfg: &ResolvedConfig,
    tasks: &[FewShotTask],
    data: &EpisodeData,
    workers: usize,
) -> Result<EvalReport> {
    let normalized;
    let data = if cfg.normalize_features {
        normalized = data.l2_normalized();
        &normalized
    } else {
        data
    };
    let accuracies: Vec<f64> = run_parallel(workers, || {
        tasks
            .par_iter()
            .map(|t| evaluate_task(method, cfg, t, data))
            .collect::<Result<Vec<_>>>()
    })?;
    let (mean, se) = aggregate(&accuracies)?;
    Ok(EvalReport {
        method,
        config: cfg.clone(),
        task_count: accuracies.len(),
        mean,
        se,
        accuracies,
    })
}

/// Samples `cfg.tasks` episodes from `cfg.seed` and evaluates `method` on them.
pub fn evaluate_method(
    method: Method,
    cfg: &ResolvedConfig,
    data: &EpisodeData,
    workers: usize,
) -> Result<EvalReport> {
    let tasks = sample_tasks(data, cfg)?;
    evaluate_tasks(method, cfg, &tasks, data, workers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub extra_labels: usize,
    pub mean: f64,
    pub se: f64,
}

/// K-Prop accuracy as a function of the number of propagated labels, every
/// point evaluated on the same task set.
pub fn sweep_extra_labels(
    data: &EpisodeData,
    cfg: &ResolvedConfig,
    extra_label_values: &[usize],
    workers: usize,
) -> Result<Vec<SweepPoint>> {
    let tasks = sample_tasks(data, cfg)?;
    extra_label_values
        .iter()
        .map(|&m| {
            let point_cfg = ResolvedConfig {
                extra_labels: m,
                ..cfg.clone()
            };
            let r = evaluate_tasks(Method::KProp, &point_cfg, &tasks, data, workers)?;
            Ok(SweepPoint {
                extra_labels: m,
                mean: r.mean,
                se: r.se,
            })
        })
        .collect()
}
