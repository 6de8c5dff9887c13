//! Kernel PCA fitted to one class, scored by reconstruction error in the
//! implicit feature space.
//!
//! For training points `x_1..x_n` and a query `z`, the reconstruction error is
//!
//! ```text
//! L(z) = k(z,z) - (2/n) sum_i k(z,x_i) + (1/n^2) sum_ij k(x_i,x_j) - sum_l f_l(z)^2
//! f_l(z) = sum_i a_li [ k(z,x_i) - rowmean_i - (1/n) sum_r k(z,x_r) + grandmean ]
//! ```
//!
//! i.e. the squared distance between the centered image of `z` and its projection
//! onto the leading `q` principal axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{center_kernel_matrix, kernel_matrix, Kernel};
use crate::matrix::{check_dims, FeatureMatrix};
use crate::numerics::eigh_symmetric;

const EIGEN_CUTOFF: f64 = 1e-10;

/// Which kernel matrix supplies the expansion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenBasis {
    /// Eigenvectors of the mean-centered kernel matrix.
    #[default]
    Centered,
    /// Eigenvectors of the uncentered kernel matrix. Diagnostic only: the
    /// projection still applies centering, so scores are not guaranteed
    /// non-negative or monotone in `q`.
    Raw,
}

/// `q = floor(2k/3 + 1)` principal components for `k` labels per class.
pub fn default_components(shot: usize) -> usize {
    (2 * shot + 3) / 3
}

/// Reconstruction error of one query. `raw` may dip slightly below zero from
/// round-off; [`Score::value`] clamps it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub raw: f64,
}

impl Score {
    pub fn value(&self) -> f64 {
        self.raw.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpcaModel {
    train_points: FeatureMatrix,
    kernel: Kernel,
    basis: EigenBasis,
    /// Coefficient vectors of every retained component, scaled so that
    /// `eigenvalue * ||alpha||^2 = 1`.
    alphas: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    q_requested: usize,
    q_effective: usize,
    row_means: Vec<f64>,
    grand_mean: f64,
}

/// Fits kernel PCA on the centered kernel matrix of `points`.
///
/// Components with eigenvalue at or below `1e-10 * max(1, trace)` are discarded and
/// `q` is clamped to the number that remain.
pub fn fit_kpca(points: &FeatureMatrix, kernel: Kernel, q: usize) -> Result<KpcaModel> {
    fit_kpca_with_basis(points, kernel, q, EigenBasis::Centered)
}

pub fn fit_kpca_with_basis(
    points: &FeatureMatrix,
    kernel: Kernel,
    q: usize,
    basis: EigenBasis,
) -> Result<KpcaModel> {
    if points.rows() == 0 {
        return Err(Error::EmptySet("kernel PCA needs at least one point".into()));
    }
    let k = kernel_matrix(points, &kernel)?;
    let centered = center_kernel_matrix(&k);
    let target = match basis {
        EigenBasis::Centered => &centered.centered,
        EigenBasis::Raw => &centered.raw,
    };
    let eig = eigh_symmetric(target);
    let cutoff = EIGEN_CUTOFF * target.trace().max(1.0);

    let mut alphas = Vec::new();
    let mut eigenvalues = Vec::new();
    for (lambda, v) in eig.values.iter().zip(eig.vectors) {
        if *lambda <= cutoff {
            break;
        }
        let scale = lambda.sqrt();
        alphas.push(v.into_iter().map(|x| x / scale).collect());
        eigenvalues.push(*lambda);
    }
    let q_effective = q.min(eigenvalues.len());
    Ok(KpcaModel {
        train_points: points.clone(),
        kernel,
        basis,
        alphas,
        eigenvalues,
        q_requested: q,
        q_effective,
        row_means: centered.row_means,
        grand_mean: centered.grand_mean,
    })
}

impl KpcaModel {
    pub fn train_points(&self) -> &FeatureMatrix {
        &self.train_points
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn basis(&self) -> EigenBasis {
        self.basis
    }

    /// Eigenvalues of every retained component, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn alphas(&self) -> &[Vec<f64>] {
        &self.alphas
    }

    pub fn q_requested(&self) -> usize {
        self.q_requested
    }

    pub fn q_effective(&self) -> usize {
        self.q_effective
    }

    pub fn retained(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    pub fn dim(&self) -> usize {
        self.train_points.cols()
    }

    /// Same fit, different component count. No refit is needed since all
    /// retained eigenpairs are kept.
    pub fn with_components(&self, q: usize) -> Self {
        let mut m = self.clone();
        m.q_requested = q;
        m.q_effective = q.min(m.eigenvalues.len());
        m
    }

    fn kernel_row(&self, z: &[f64]) -> Vec<f64> {
        self.train_points
            .iter_rows()
            .map(|x| self.kernel.eval_unchecked(z, x))
            .collect()
    }

    fn projections_from_row(&self, kz: &[f64]) -> Vec<f64> {
        let n = kz.len() as f64;
        let kz_mean = kz.iter().sum::<f64>() / n;
        let centered: Vec<f64> = kz
            .iter()
            .zip(&self.row_means)
            .map(|(k, rm)| k - rm - kz_mean + self.grand_mean)
            .collect();
        self.alphas[..self.q_effective]
            .iter()
            .map(|a| a.iter().zip(&centered).map(|(x, y)| x * y).sum())
            .collect()
    }

    /// Coordinates of `z` along the first `q_effective` principal components.
    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dim(), z.len())?;
        Ok(self.projections_from_row(&self.kernel_row(z)))
    }

    pub fn reconstruction_error(&self, z: &[f64]) -> Result<Score> {
        check_dims(self.dim(), z.len())?;
        let kz = self.kernel_row(z);
        let n = kz.len() as f64;
        let kzz = self.kernel.eval_unchecked(z, z);
        let kz_mean = kz.iter().sum::<f64>() / n;
        let explained: f64 = self.projections_from_row(&kz).iter().map(|f| f * f).sum();
        Ok(Score {
            raw: kzz - 2.0 * kz_mean + self.grand_mean - explained,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss() -> Kernel {
        Kernel::gaussian(16.0).unwrap()
    }

    fn pair() -> FeatureMatrix {
        FeatureMatrix::from_rows(&[[0.0, 0.0], [8.0, 0.0]]).unwrap()
    }

    #[test]
    fn default_component_counts() {
        assert_eq!(default_components(1), 1);
        assert_eq!(default_components(2), 2);
        assert_eq!(default_components(5), 4);
        assert_eq!(default_components(10), 7);
    }

    #[test]
    fn single_point_has_no_components() {
        let p = FeatureMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let m = fit_kpca(&p, gauss(), 3).unwrap();
        assert_eq!(m.q_effective(), 0);
        assert!(m.project(&[5.0, 5.0]).unwrap().is_empty());
    }

    #[test]
    fn single_point_closed_form() {
        let p = FeatureMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let m = fit_kpca(&p, gauss(), 1).unwrap();
        let z = [4.0, -2.0];
        let k = gauss().eval(&z, p.row(0)).unwrap();
        let s = m.reconstruction_error(&z).unwrap();
        assert!((s.raw - (2.0 - 2.0 * k)).abs() < 1e-12);
        assert_eq!(m.reconstruction_error(&[1.0, 2.0]).unwrap().value(), 0.0);
    }

    #[test]
    fn coincident_points_have_no_components() {
        let p = FeatureMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(fit_kpca(&p, gauss(), 1).unwrap().q_effective(), 0);
    }

    #[test]
    fn two_point_eigenpair() {
        let m = fit_kpca(&pair(), gauss(), 1).unwrap();
        assert_eq!(m.q_effective(), 1);
        let b = (-0.125f64).exp();
        assert!((m.eigenvalues()[0] - (1.0 - b)).abs() < 1e-12);
        assert!((m.eigenvalues()[0] - 0.1175031).abs() < 1e-7);
        let a = &m.alphas()[0];
        assert!((a[0] + a[1]).abs() < 1e-12);
        let norm2: f64 = a.iter().map(|x| x * x).sum();
        assert!((m.eigenvalues()[0] * norm2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_point_projections() {
        let m = fit_kpca(&pair(), gauss(), 1).unwrap();
        let mid = m.project(&[4.0, 0.0]).unwrap();
        assert!(mid[0].abs() < 1e-12);
        let b = (-0.125f64).exp();
        let at_x1 = m.project(&[0.0, 0.0]).unwrap()[0].abs();
        assert!((at_x1 - ((1.0 - b) / 2.0).sqrt()).abs() < 1e-12);
        assert!((at_x1 - 0.2423).abs() < 1e-4);
    }

    #[test]
    fn two_point_midpoint_error() {
        let m = fit_kpca(&pair(), gauss(), 1).unwrap();
        let s = m.reconstruction_error(&[4.0, 0.0]).unwrap();
        let c = (-0.03125f64).exp();
        let b = (-0.125f64).exp();
        assert!((s.raw - (1.0 - 2.0 * c + (1.0 + b) / 2.0)).abs() < 1e-12);
        assert!((s.raw - 0.0027820).abs() < 1e-6);
    }

    #[test]
    fn training_points_reconstruct_exactly_at_full_rank() {
        let p = FeatureMatrix::from_rows(&[[0.0, 0.0], [8.0, 0.0], [3.0, 5.0], [-4.0, 9.0]]).unwrap();
        let m = fit_kpca(&p, gauss(), 10).unwrap();
        assert_eq!(m.q_effective(), 3);
        for x in p.iter_rows() {
            let s = m.reconstruction_error(x).unwrap();
            assert!(s.raw.abs() < 1e-8, "{}", s.raw);
            let f = m.project(x).unwrap();
            let self_term = 1.0 - 2.0 * {
                let kz: Vec<f64> = p.iter_rows().map(|y| gauss().eval(x, y).unwrap()).collect();
                kz.iter().sum::<f64>() / 4.0
            } + m.grand_mean();
            let sumsq: f64 = f.iter().map(|v| v * v).sum();
            assert!((sumsq - self_term).abs() < 1e-8);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = fit_kpca(&pair(), gauss(), 1).unwrap();
        assert!(matches!(m.project(&[1.0]), Err(Error::Shape(_))));
        assert!(matches!(m.reconstruction_error(&[1.0, 2.0, 3.0]), Err(Error::Shape(_))));
        assert!(matches!(
            fit_kpca(&FeatureMatrix::zeros(0, 2), gauss(), 1),
            Err(Error::EmptySet(_))
        ));
    }

    #[test]
    fn raw_basis_still_fits() {
        let m = fit_kpca_with_basis(&pair(), gauss(), 1, EigenBasis::Raw).unwrap();
        assert_eq!(m.basis(), EigenBasis::Raw);
        assert_eq!(m.q_effective(), 1);
        assert!(m.reconstruction_error(&[4.0, 0.0]).unwrap().raw.is_finite());
    }
}
