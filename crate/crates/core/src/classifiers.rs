//! The reconstruction-error decision rule and the evaluation-time baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpca::KpcaModel;
use crate::matrix::{check_dims, dot, euclidean_distance, FeatureMatrix};
use crate::numerics::thin_svd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreConvention {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub predicted_class: usize,
    pub per_class_scores: Vec<f64>,
    pub convention: ScoreConvention,
}

impl ClassifierVerdict {
    /// Picks the best score under `convention`; the lowest class id wins ties.
    pub fn from_scores(scores: Vec<f64>, convention: ScoreConvention) -> Self {
        let mut best = 0;
        for (c, s) in scores.iter().enumerate().skip(1) {
            let better = match convention {
                ScoreConvention::LowerIsBetter => *s < scores[best],
                ScoreConvention::HigherIsBetter => *s > scores[best],
            };
            if better {
                best = c;
            }
        }
        Self {
            predicted_class: best,
            per_class_scores: scores,
            convention,
        }
    }
}

/// Assigns `z` to the class model with the smallest reconstruction error.
pub fn classify_kprop(models: &[KpcaModel], z: &[f64]) -> Result<ClassifierVerdict> {
    if models.len() < 2 {
        return Err(Error::Precondition(format!(
            "need at least two class models, got {}",
            models.len()
        )));
    }
    let scores = models
        .iter()
        .map(|m| m.reconstruction_error(z).map(|s| s.value()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassifierVerdict::from_scores(scores, ScoreConvention::LowerIsBetter))
}

fn check_classes(supports: &[FeatureMatrix]) -> Result<usize> {
    let first = supports
        .first()
        .ok_or_else(|| Error::EmptySet("no classes given".into()))?;
    let dim = first.cols();
    for (c, s) in supports.iter().enumerate() {
        if s.rows() == 0 {
            return Err(Error::EmptySet(format!("class {c} has no support points")));
        }
        check_dims(dim, s.cols())?;
    }
    Ok(dim)
}

/// Nearest class mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    means: Vec<Vec<f64>>,
}

impl Prototypes {
    pub fn fit(supports: &[FeatureMatrix]) -> Result<Self> {
        check_classes(supports)?;
        Ok(Self {
            means: supports.iter().map(FeatureMatrix::column_means).collect(),
        })
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn classify(&self, z: &[f64]) -> Result<ClassifierVerdict> {
        check_dims(self.means[0].len(), z.len())?;
        let scores = self.means.iter().map(|m| euclidean_distance(m, z)).collect();
        Ok(ClassifierVerdict::from_scores(scores, ScoreConvention::LowerIsBetter))
    }
}

pub fn classify_prototype(supports: &[FeatureMatrix], z: &[f64]) -> Result<ClassifierVerdict> {
    Prototypes::fit(supports)?.classify(z)
}

/// Distance to each class's affine subspace: the class mean plus the span of
/// the leading right singular vectors of the mean-centered supports.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspaces {
    means: Vec<Vec<f64>>,
    bases: Vec<Vec<Vec<f64>>>,
}

/// Relative tolerance on singular values when clamping the subspace dimension to rank.
const RANK_TOL: f64 = 1e-10;

/// `min(k - 1, 4)`.
pub fn default_subspace_dim(shot: usize) -> usize {
    shot.saturating_sub(1).min(4)
}

impl Subspaces {
    /// A class with a single support point gets an empty basis, so its score is
    /// the plain distance to that point.
    pub fn fit(supports: &[FeatureMatrix], dim: usize) -> Result<Self> {
        check_classes(supports)?;
        let mut means = Vec::with_capacity(supports.len());
        let mut bases = Vec::with_capacity(supports.len());
        for s in supports {
            let mean = s.column_means();
            let mut basis = Vec::new();
            if s.rows() >= 2 && dim > 0 {
                let mut centered = s.clone();
                for i in 0..centered.rows() {
                    centered
                        .row_mut(i)
                        .iter_mut()
                        .zip(&mean)
                        .for_each(|(v, m)| *v -= m);
                }
                let svd = thin_svd(&centered)?;
                let keep = dim.min(svd.rank(RANK_TOL));
                basis = (0..keep).map(|l| svd.right_vector(l)).collect();
            }
            means.push(mean);
            bases.push(basis);
        }
        Ok(Self { means, bases })
    }

    pub fn classify(&self, z: &[f64]) -> Result<ClassifierVerdict> {
        check_dims(self.means[0].len(), z.len())?;
        let scores = self
            .means
            .iter()
            .zip(&self.bases)
            .map(|(mean, basis)| {
                let mut r: Vec<f64> = z.iter().zip(mean).map(|(a, b)| a - b).collect();
                for v in basis {
                    let p = dot(&r, v);
                    r.iter_mut().zip(v).for_each(|(x, y)| *x -= p * y);
                }
                dot(&r, &r).sqrt()
            })
            .collect();
        Ok(ClassifierVerdict::from_scores(scores, ScoreConvention::LowerIsBetter))
    }
}

pub fn classify_subspace(
    supports: &[FeatureMatrix],
    z: &[f64],
    dim: usize,
) -> Result<ClassifierVerdict> {
    Subspaces::fit(supports, dim)?.classify(z)
}

/// Full-batch gradient descent schedule for the softmax classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub checkpoint_every: usize,
}

impl Default for LinearSchedule {
    fn default() -> Self {
        Self {
            steps: 1000,
            learning_rate: 0.01,
            weight_decay: 1e-4,
            checkpoint_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub iterations: usize,
    pub final_loss: f64,
    /// `(step, loss)` pairs, including step 0 and the final step.
    pub checkpoints: Vec<(usize, f64)>,
}

/// Multinomial logistic regression on frozen features.
///
/// Inputs are shifted by the mean of the training points before the affine
/// map; the bias absorbs the shift, so this only conditions the descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `classes x dim`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub offset: Vec<f64>,
    pub trace: TrainingTrace,
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    logits.iter_mut().for_each(|l| *l /= sum);
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

pub fn train_linear(supports: &[FeatureMatrix]) -> Result<LinearModel> {
    train_linear_with(supports, &LinearSchedule::default())
}

pub fn train_linear_with(supports: &[FeatureMatrix], schedule: &LinearSchedule) -> Result<LinearModel> {
    let dim = check_classes(supports)?;
    if supports.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidValue("support features are not finite".into()));
    }
    let classes = supports.len();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<usize> = Vec::new();
    for (c, s) in supports.iter().enumerate() {
        for r in s.iter_rows() {
            xs.push(r.to_vec());
            ys.push(c);
        }
    }
    let n = xs.len() as f64;
    let mut offset = vec![0.0; dim];
    for x in &xs {
        offset.iter_mut().zip(x).for_each(|(o, v)| *o += v);
    }
    offset.iter_mut().for_each(|o| *o /= n);
    for x in xs.iter_mut() {
        x.iter_mut().zip(&offset).for_each(|(v, o)| *v -= o);
    }

    let mut w = vec![vec![0.0; dim]; classes];
    let mut b = vec![0.0; classes];
    let loss = |w: &[Vec<f64>], b: &[f64]| -> f64 {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(&ys) {
            let logits: Vec<f64> = w.iter().zip(b).map(|(wc, bc)| dot(wc, x) + bc).collect();
            total += log_sum_exp(&logits) - logits[y];
        }
        let penalty: f64 = w.iter().flatten().map(|v| v * v).sum();
        total / n + 0.5 * schedule.weight_decay * penalty
    };

    let mut checkpoints = vec![(0, loss(&w, &b))];
    let mut gw = vec![vec![0.0; dim]; classes];
    let mut gb = vec![0.0; classes];
    for step in 1..=schedule.steps {
        gw.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
        gb.iter_mut().for_each(|v| *v = 0.0);
        for (x, &y) in xs.iter().zip(&ys) {
            let mut p: Vec<f64> = w.iter().zip(&b).map(|(wc, bc)| dot(wc, x) + bc).collect();
            softmax_in_place(&mut p);
            p[y] -= 1.0;
            for c in 0..classes {
                gb[c] += p[c];
                gw[c].iter_mut().zip(x).for_each(|(g, v)| *g += p[c] * v);
            }
        }
        for c in 0..classes {
            b[c] -= schedule.learning_rate * gb[c] / n;
            for (wv, g) in w[c].iter_mut().zip(&gw[c]) {
                *wv -= schedule.learning_rate * (g / n + schedule.weight_decay * *wv);
            }
        }
        if schedule.checkpoint_every > 0 && step % schedule.checkpoint_every == 0 {
            checkpoints.push((step, loss(&w, &b)));
        }
    }
    let final_loss = loss(&w, &b);
    if checkpoints.last().map(|c| c.0) != Some(schedule.steps) {
        checkpoints.push((schedule.steps, final_loss));
    }
    if w.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("linear classifier diverged".into()));
    }
    Ok(LinearModel {
        weights: w,
        biases: b,
        offset,
        trace: TrainingTrace {
            iterations: schedule.steps,
            final_loss,
            checkpoints,
        },
    })
}

impl LinearModel {
    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.offset.len(), z.len())?;
        let x: Vec<f64> = z.iter().zip(&self.offset).map(|(v, o)| v - o).collect();
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, &x) + b)
            .collect())
    }
}

/// Argmax of the logits.
pub fn classify_linear(model: &LinearModel, z: &[f64]) -> Result<ClassifierVerdict> {
    Ok(ClassifierVerdict::from_scores(
        model.logits(z)?,
        ScoreConvention::HigherIsBetter,
    ))
}
