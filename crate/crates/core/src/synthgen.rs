//! Synthetic feature sets whose classes are sparse graphs threaded through a
//! shared region, rather than compact clusters.
//!
//! Each class gets one anchor drawn uniformly from the ball of radius
//! `dispersion` around the origin. From that anchor grow `chains_per_class`
//! independent Gaussian random walks whose steps have expected squared length
//! `step^2`. Walks live in a `walk_dim`-dimensional subspace shared by all
//! classes and are embedded into `dim` dimensions by a random orthonormal map.
//! Shrinking `step / dispersion` raises nearest-neighbor purity.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::geometry::estimate_pnn;
use crate::matrix::{dot, FeatureMatrix};
use crate::rng::derive_rng;

/// Stream used for the embedding; class `c` uses stream `c`.
const EMBEDDING_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: usize,
    pub points_per_class: usize,
    pub dim: usize,
    /// Dimension of the subspace the walks move in.
    pub walk_dim: usize,
    pub step: f64,
    pub dispersion: f64,
    pub chains_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            points_per_class: 100,
            dim: 32,
            walk_dim: 10,
            step: 10.0,
            dispersion: 10.0,
            chains_per_class: 25,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("synthetic config: {what}")));
        if self.classes == 0 {
            return bad("classes must be positive");
        }
        if self.points_per_class == 0 {
            return bad("points per class must be positive");
        }
        if self.dim < 2 {
            return bad("dimension must be at least 2");
        }
        if self.walk_dim == 0 || self.walk_dim > self.dim {
            return bad("walk dimension must be in 1..=dimension");
        }
        if self.chains_per_class == 0 || self.chains_per_class > self.points_per_class {
            return bad("chains per class must be in 1..=points per class");
        }
        if !(self.dispersion.is_finite() && self.dispersion > 0.0) {
            return bad("dispersion must be positive");
        }
        if !(self.step.is_finite() && self.step >= 0.0) {
            return bad("step must be non-negative");
        }
        Ok(())
    }

    /// Sets `step = ratio * dispersion`.
    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.step = ratio * self.dispersion;
        self
    }

    /// Sets `dispersion = step / ratio`, keeping the walk scale fixed.
    pub fn with_ratio_fixed_step(mut self, ratio: f64) -> Self {
        self.dispersion = self.step / ratio;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    /// Nearest-neighbor purity over all classes, measured after generation.
    pub achieved_pnn: f64,
}

impl SynthDataset {
    pub fn into_dataset(self) -> Dataset {
        Dataset {
            features: self.features,
            labels: self.labels,
        }
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn uniform_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let dir = gaussian_vec(rng, dim, 1.0);
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|v| v * r / norm).collect()
}

/// `count` orthonormal vectors of length `dim` by Gram-Schmidt on Gaussian draws.
fn random_orthonormal<R: Rng>(rng: &mut R, dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian_vec(rng, dim, 1.0);
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Rows are grouped by class, then by chain, in walk order.
pub fn generate_sparse_graph_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let embedding = random_orthonormal(
        &mut derive_rng(cfg.seed, EMBEDDING_STREAM),
        cfg.dim,
        cfg.walk_dim,
    );
    let step_scale = cfg.step / (cfg.walk_dim as f64).sqrt();
    let mut rows: Vec<f64> = Vec::with_capacity(cfg.classes * cfg.points_per_class * cfg.dim);
    let mut labels = Vec::with_capacity(cfg.classes * cfg.points_per_class);
    for c in 0..cfg.classes {
        let mut rng = derive_rng(cfg.seed, c as u64);
        let anchor = uniform_in_ball(&mut rng, cfg.walk_dim, cfg.dispersion);
        let base = cfg.points_per_class / cfg.chains_per_class;
        let extra = cfg.points_per_class % cfg.chains_per_class;
        for chain in 0..cfg.chains_per_class {
            let len = base + usize::from(chain < extra);
            let mut pos = anchor.clone();
            for _ in 0..len {
                let delta = gaussian_vec(&mut rng, cfg.walk_dim, step_scale);
                pos.iter_mut().zip(delta).for_each(|(p, d)| *p += d);
                let mut row = vec![0.0; cfg.dim];
                for (coord, axis) in pos.iter().zip(&embedding) {
                    row.iter_mut().zip(axis).for_each(|(r, a)| *r += coord * a);
                }
                rows.extend_from_slice(&row);
                labels.push(c);
            }
        }
    }
    let features = FeatureMatrix::new(labels.len(), cfg.dim, rows)?;
    let achieved_pnn = if cfg.classes >= 2 {
        estimate_pnn(&features, &labels, cfg.classes, 1, cfg.seed)?.mean
    } else {
        1.0
    };
    Ok(SynthDataset {
        features,
        labels,
        achieved_pnn,
    })
}
