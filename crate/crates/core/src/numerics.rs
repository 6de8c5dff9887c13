//! Small dense symmetric eigenproblems (cyclic Jacobi) and a Gram-based thin SVD.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, FeatureMatrix};

const SYMMETRY_TOL: f64 = 1e-12;
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// A real symmetric `n x n` matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Validates finiteness and symmetry (to `1e-12` relative to the largest entry, floored at 1).
    pub fn new(order: usize, entries: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::EmptySet("symmetric matrix of order 0".into()));
        }
        if entries.len() != order * order {
            return Err(Error::Shape(format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite entry at ({}, {})",
                pos / order,
                pos % order
            )));
        }
        let scale = entries.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..order {
            for j in (i + 1)..order {
                let diff = (entries[i * order + j] - entries[j * order + i]).abs();
                if diff > SYMMETRY_TOL * scale {
                    return Err(Error::SymmetryViolation { row: i, col: j, diff });
                }
            }
        }
        Ok(Self { order, entries })
    }

    /// Builds a matrix from its upper triangle, mirroring it to the lower half.
    pub(crate) fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            for j in i..order {
                let v = f(i, j);
                entries[i * order + j] = v;
                entries[j * order + i] = v;
            }
        }
        Self { order, entries }
    }

    pub fn identity(order: usize) -> Self {
        Self::from_fn(order, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigenpairs sorted by descending eigenvalue. `vectors[i]` belongs to `values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-12 * (1 + ||m||_F)`, or after 100 sweeps.
pub fn eigh_symmetric(m: &SymMatrix) -> EigenDecomposition {
    let n = m.order();
    let mut a = m.entries().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let tol = JACOBI_TOL * (1.0 + m.frobenius_norm());

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a, n) < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep Jacobi output order
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|k| v[k * n + j]).collect())
        .collect();
    EigenDecomposition { values, vectors }
}

/// Thin singular value decomposition `a = U diag(s) V^T` with `r = min(n, d)` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    /// `n x r`, columns are left singular vectors.
    pub u: FeatureMatrix,
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    /// `d x r`, columns are right singular vectors.
    pub v: FeatureMatrix,
}

impl ThinSvd {
    /// Number of singular values above `tol * max(1, s_max)`.
    pub fn rank(&self, tol: f64) -> usize {
        let cut = tol * self.singular_values.first().copied().unwrap_or(0.0).max(1.0);
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    pub fn right_vector(&self, l: usize) -> Vec<f64> {
        (0..self.v.rows()).map(|k| self.v.get(k, l)).collect()
    }

    pub fn left_vector(&self, l: usize) -> Vec<f64> {
        (0..self.u.rows()).map(|k| self.u.get(k, l)).collect()
    }
}

/// Thin SVD through the eigendecomposition of the smaller Gram matrix.
///
/// Each singular value is recomputed as the norm of the mapped eigenvector so the
/// factors reconstruct `a` to working precision even where the Gram spectrum is
/// poorly resolved. Columns belonging to zero singular values are completed to an
/// orthonormal set.
pub fn thin_svd(a: &FeatureMatrix) -> Result<ThinSvd> {
    let (n, d) = (a.rows(), a.cols());
    if n == 0 || d == 0 {
        return Err(Error::EmptySet(format!("cannot decompose a {n}x{d} matrix")));
    }
    if !a.is_finite() {
        return Err(Error::InvalidValue("matrix has non-finite entries".into()));
    }
    let r = n.min(d);
    // Eigenvectors of the Gram matrix on the short side; the long side is mapped.
    let transpose = n < d;
    let (short, long) = if transpose { (n, d) } else { (d, n) };
    let entry = |row: usize, col: usize| -> f64 {
        // element (row, col) of the matrix whose columns are indexed by `short`
        if transpose {
            a.get(col, row)
        } else {
            a.get(row, col)
        }
    };
    let gram = SymMatrix::from_fn(short, |i, j| (0..long).map(|k| entry(k, i) * entry(k, j)).sum());
    let eig = eigh_symmetric(&gram);

    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = eig
        .vectors
        .into_iter()
        .take(r)
        .map(|w| {
            let mapped: Vec<f64> = (0..long)
                .map(|k| (0..short).map(|i| entry(k, i) * w[i]).sum())
                .collect();
            let s = dot(&mapped, &mapped).sqrt();
            (s, w, mapped)
        })
        .collect();
    triples.sort_by(|x, y| y.0.total_cmp(&x.0));

    let s_max = triples.first().map_or(0.0, |t| t.0);
    let zero_cut = f64::EPSILON * s_max * (n.max(d) as f64);
    let mut singular_values = Vec::with_capacity(r);
    let mut short_vecs = Vec::with_capacity(r);
    let mut long_vecs: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut pending_zero = Vec::new();
    for (idx, (s, w, mut mapped)) in triples.into_iter().enumerate() {
        if s > zero_cut && s > 0.0 {
            mapped.iter_mut().for_each(|x| *x /= s);
            singular_values.push(s);
        } else {
            singular_values.push(0.0);
            pending_zero.push(idx);
        }
        short_vecs.push(w);
        long_vecs.push(mapped);
    }
    // Complete the long-side basis for null directions.
    for &idx in &pending_zero {
        long_vecs[idx] = complete_orthonormal(&long_vecs, &pending_zero, idx, long);
    }

    let to_matrix = |cols: &[Vec<f64>], rows: usize| {
        let mut m = FeatureMatrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, x) in c.iter().enumerate() {
                m.row_mut(i)[j] = *x;
            }
        }
        m
    };
    let (u_cols, v_cols) = if transpose {
        (short_vecs, long_vecs)
    } else {
        (long_vecs, short_vecs)
    };
    Ok(ThinSvd {
        u: to_matrix(&u_cols, n),
        singular_values,
        v: to_matrix(&v_cols, d),
    })
}

/// Picks the first standard basis vector that survives Gram-Schmidt against the
/// already-fixed columns (every column except unfilled null ones at or after `idx`).
fn complete_orthonormal(cols: &[Vec<f64>], pending: &[usize], idx: usize, dim: usize) -> Vec<f64> {
    let fixed: Vec<&Vec<f64>> = cols
        .iter()
        .enumerate()
        .filter(|(j, _)| !pending.contains(j) || *j < idx)
        .map(|(_, c)| c)
        .collect();
    for e in 0..dim {
        let mut cand = vec![0.0; dim];
        cand[e] = 1.0;
        for _ in 0..2 {
            for c in &fixed {
                let p = dot(&cand, c);
                cand.iter_mut().zip(c.iter()).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        if norm > 0.5 {
            cand.iter_mut().for_each(|x| *x /= norm);
            return cand;
        }
    }
    vec![0.0; dim]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reconstruct(e: &EigenDecomposition, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += lam * v[i] * v[j];
                }
            }
        }
        out
    }

    #[test]
    fn identity_spectrum() {
        let e = eigh_symmetric(&SymMatrix::identity(3));
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_spectrum() {
        let m = SymMatrix::new(2, vec![2.0, 0.0, 0.0, -1.0]).unwrap();
        let e = eigh_symmetric(&m);
        assert_eq!(e.values, vec![2.0, -1.0]);
        assert_eq!(e.vectors[0], vec![1.0, 0.0]);
        assert_eq!(e.vectors[1], vec![0.0, 1.0]);
    }

    #[test]
    fn two_by_two_centering_shape() {
        let m = SymMatrix::new(2, vec![0.5, -0.5, -0.5, 0.5]).unwrap();
        let e = eigh_symmetric(&m);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!(e.values[1].abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = &e.vectors[0];
        let sign = v[0].signum();
        assert!((sign * v[0] - h).abs() < 1e-14);
        assert!((sign * v[1] + h).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric_and_nan() {
        assert!(matches!(
            SymMatrix::new(2, vec![1.0, 2.0, 2.5, 1.0]),
            Err(Error::SymmetryViolation { .. })
        ));
        assert!(matches!(
            SymMatrix::new(2, vec![1.0, f64::NAN, f64::NAN, 1.0]),
            Err(Error::InvalidValue(_))
        ));
    }

    #[test]
    fn svd_rank_one_row() {
        let a = FeatureMatrix::from_rows(&[[3.0, 0.0, 4.0]]).unwrap();
        let s = thin_svd(&a).unwrap();
        assert_eq!(s.singular_values.len(), 1);
        assert!((s.singular_values[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn svd_zero_matrix() {
        let s = thin_svd(&FeatureMatrix::zeros(3, 2)).unwrap();
        assert_eq!(s.singular_values, vec![0.0, 0.0]);
        // completed basis is orthonormal
        let c0 = s.left_vector(0);
        let c1 = s.left_vector(1);
        assert!((dot(&c0, &c0) - 1.0).abs() < 1e-12);
        assert!(dot(&c0, &c1).abs() < 1e-12);
    }

    #[test]
    fn svd_rejects_nan() {
        let a = FeatureMatrix::from_rows(&[[1.0, f64::INFINITY]]).unwrap();
        assert!(matches!(thin_svd(&a), Err(Error::InvalidValue(_))));
    }

    fn sym_strategy() -> impl Strategy<Value = SymMatrix> {
        (1usize..9).prop_flat_map(|n| {
            proptest::collection::vec(-5.0f64..5.0, n * n).prop_map(move |raw| {
                SymMatrix::from_fn(n, |i, j| 0.5 * (raw[i * n + j] + raw[j * n + i]))
            })
        })
    }

    proptest! {
        #[test]
        fn eigh_reconstructs_and_preserves_invariants(m in sym_strategy()) {
            let n = m.order();
            let e = eigh_symmetric(&m);
            let fro = m.frobenius_norm();
            let rec = reconstruct(&e, n);
            for (x, y) in rec.iter().zip(m.entries()) {
                prop_assert!((x - y).abs() < 1e-8 * (1.0 + fro));
            }
            for w in e.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            for i in 0..n {
                for j in 0..n {
                    let d = dot(&e.vectors[i], &e.vectors[j]);
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - target).abs() < 1e-9);
                }
            }
            let tr = m.trace();
            let sum: f64 = e.values.iter().sum();
            prop_assert!((sum - tr).abs() < 1e-8 * (1.0 + tr.abs()));
            let sq: f64 = e.values.iter().map(|l| l * l).sum();
            prop_assert!((sq - fro * fro).abs() < 1e-8 * (1.0 + fro * fro));
            // A v = lambda v
            for (lam, v) in e.values.iter().zip(&e.vectors) {
                for i in 0..n {
                    let av: f64 = (0..n).map(|j| m.get(i, j) * v[j]).sum();
                    prop_assert!((av - lam * v[i]).abs() < 1e-8 * (1.0 + fro));
                }
            }
            prop_assert_eq!(eigh_symmetric(&m), e);
        }

        #[test]
        fn svd_reconstructs(n in 1usize..8, d in 1usize..8, seed in proptest::collection::vec(-3.0f64..3.0, 64)) {
            let a = FeatureMatrix::new(n, d, seed[..n * d].to_vec()).unwrap();
            let s = thin_svd(&a).unwrap();
            let fro = a.frobenius_norm();
            for i in 0..n {
                for j in 0..d {
                    let x: f64 = (0..n.min(d))
                        .map(|l| s.u.get(i, l) * s.singular_values[l] * s.v.get(j, l))
                        .sum();
                    prop_assert!((x - a.get(i, j)).abs() < 1e-8 * (1.0 + fro));
                }
            }
            for w in s.singular_values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            // singular values are square roots of the eigenvalues of A^T A
            let ata = SymMatrix::from_fn(d, |i, j| (0..n).map(|k| a.get(k, i) * a.get(k, j)).sum());
            let e = eigh_symmetric(&ata);
            for (l, sv) in s.singular_values.iter().enumerate() {
                prop_assert!((sv - e.values[l].max(0.0).sqrt()).abs() < 1e-8 * (1.0 + fro));
            }
        }
    }

    #[test]
    fn svd_random_six_by_four() {
        let vals: Vec<f64> = (0..24).map(|i| ((i * 37 + 11) % 17) as f64 / 3.0 - 2.5).collect();
        let a = FeatureMatrix::new(6, 4, vals).unwrap();
        let s = thin_svd(&a).unwrap();
        for i in 0..6 {
            for j in 0..4 {
                let x: f64 = (0..4).map(|l| s.u.get(i, l) * s.singular_values[l] * s.v.get(j, l)).sum();
                assert!((x - a.get(i, j)).abs() < 1e-8 * (1.0 + a.frobenius_norm()));
            }
        }
    }
}
