//! Kernel evaluation, kernel matrices and centering in the implicit feature space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_dims, dot, squared_distance, FeatureMatrix};
use crate::numerics::SymMatrix;

pub const DEFAULT_SIGMA: f64 = 16.0;

/// Width of the Gaussian kernel, in feature-space distance units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    sigma: f64,
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!(
                "kernel width must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
        }
    }
}

/// Kernel functions understood by kernel PCA.
///
/// `Linear` (the plain inner product) exists so kernel PCA can be checked against
/// ordinary PCA; the classifiers always use `Gaussian`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Gaussian(KernelConfig),
    Linear,
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        KernelConfig::new(sigma).map(Kernel::Gaussian)
    }

    /// Evaluates the kernel without dimension checks.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Kernel::Gaussian(cfg) => {
                (-squared_distance(x, y) / (2.0 * cfg.sigma * cfg.sigma)).exp()
            }
            Kernel::Linear => dot(x, y),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Gaussian(KernelConfig::default())
    }
}

/// `exp(-||x - y||^2 / (2 sigma^2))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<f64> {
    Kernel::Gaussian(*cfg).eval(x, y)
}

/// Gram matrix `K[i][j] = k(x_i, x_j)` over the rows of `points`.
pub fn kernel_matrix(points: &FeatureMatrix, kernel: &Kernel) -> Result<SymMatrix> {
    if points.rows() == 0 {
        return Err(Error::EmptySet("kernel matrix of zero points".into()));
    }
    if !points.is_finite() {
        return Err(Error::InvalidValue("points contain non-finite values".into()));
    }
    Ok(SymMatrix::from_fn(points.rows(), |i, j| {
        if i == j {
            if let Kernel::Gaussian(_) = kernel {
                return 1.0;
            }
        }
        kernel.eval_unchecked(points.row(i), points.row(j))
    }))
}

/// Raw and mean-centered kernel matrices plus the mean terms needed to center
/// the kernel row of a new point.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredKernel {
    pub raw: SymMatrix,
    pub centered: SymMatrix,
    /// `(1/n) sum_r K[i][r]` for each `i`.
    pub row_means: Vec<f64>,
    /// `(1/n^2) sum_{r,s} K[r][s]`.
    pub grand_mean: f64,
}

/// `K - 1_n K - K 1_n + 1_n K 1_n`, with `1_n` the `n x n` matrix of `1/n`.
pub fn center_kernel_matrix(k: &SymMatrix) -> CenteredKernel {
    let n = k.order();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / nf).collect();
    let grand_mean = row_means.iter().sum::<f64>() / nf;
    let centered = SymMatrix::from_fn(n, |i, j| {
        k.get(i, j) - row_means[i] - row_means[j] + grand_mean
    });
    CenteredKernel {
        raw: k.clone(),
        centered,
        row_means,
        grand_mean,
    }
}
