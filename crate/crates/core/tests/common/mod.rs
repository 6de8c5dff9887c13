//! Brute-force reference implementations shared by the integration tests.
//! Each one recomputes a quantity from scratch by a different route than the
//! library code it checks.

#![allow(dead_code, clippy::needless_range_loop)]

use kprop::FeatureMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> FeatureMatrix {
    let data = (0..n * d).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    FeatureMatrix::new(n, d, data).unwrap()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let t = a[i] - b[i];
        s += t * t;
    }
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormalize(vs: &mut [Vec<f64>]) {
    for i in 0..vs.len() {
        for j in 0..i {
            let p = dot(&vs[i], &vs[j]);
            let vj = vs[j].clone();
            vs[i].iter_mut().zip(&vj).for_each(|(x, y)| *x -= p * y);
        }
        let n = dot(&vs[i], &vs[i]).sqrt();
        vs[i].iter_mut().for_each(|x| *x /= n);
    }
}

/// Eigenvectors of a small symmetric matrix by orthogonal (subspace) iteration,
/// sorted by decreasing eigenvalue.
pub fn eigvecs_by_subspace_iteration(m: &[Vec<f64>], iterations: usize) -> Vec<Vec<f64>> {
    let d = m.len();
    let mut vs: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.1 / (1.0 + (i + 2 * j) as f64) }).collect())
        .collect();
    orthonormalize(&mut vs);
    for _ in 0..iterations {
        for v in vs.iter_mut() {
            *v = m.iter().map(|row| dot(row, v)).collect();
        }
        orthonormalize(&mut vs);
    }
    vs
}

/// Mean and covariance eigenvectors of `points`, computed directly in input space.
pub struct InputPca {
    mean: Vec<f64>,
    axes: Vec<Vec<f64>>,
}

impl InputPca {
    pub fn fit(points: &FeatureMatrix) -> Self {
        let n = points.rows();
        let d = points.cols();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(points.row(i)) {
                *m += x / n as f64;
            }
        }
        let mut scatter = vec![vec![0.0; d]; d];
        for i in 0..n {
            let c: Vec<f64> = points.row(i).iter().zip(&mean).map(|(x, m)| x - m).collect();
            for a in 0..d {
                for b in 0..d {
                    scatter[a][b] += c[a] * c[b];
                }
            }
        }
        let axes = eigvecs_by_subspace_iteration(&scatter, 3000);
        Self { mean, axes }
    }

    /// Squared distance from `z` to the affine span of the top-`q` axes.
    pub fn residual(&self, z: &[f64], q: usize) -> f64 {
        let zc: Vec<f64> = z.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        let mut r = dot(&zc, &zc);
        for axis in self.axes.iter().take(q) {
            let p = dot(&zc, axis);
            r -= p * p;
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefClaim {
    pub class: usize,
    pub claimed: usize,
    pub source: usize,
    pub dist2: f64,
}

/// Round-robin nearest-neighbor claiming, recomputing every labeled-to-pool
/// distance at every step.
pub fn propagate_brute_force(
    features: &FeatureMatrix,
    support: &[Vec<usize>],
    pool: &[usize],
    extra: usize,
) -> Vec<RefClaim> {
    let mut pool: Vec<usize> = pool.to_vec();
    pool.sort();
    pool.dedup();
    let mut sets = support.to_vec();
    let mut claims = Vec::new();
    for _ in 0..extra {
        for c in 0..sets.len() {
            if pool.is_empty() {
                return claims;
            }
            let mut best: Option<RefClaim> = None;
            for &j in &pool {
                for &i in &sets[c] {
                    let d = sq_dist(features.row(i), features.row(j));
                    let better = match best {
                        None => true,
                        Some(b) => {
                            d < b.dist2 || (d == b.dist2 && (j, i) < (b.claimed, b.source))
                        }
                    };
                    if better {
                        best = Some(RefClaim { class: c, claimed: j, source: i, dist2: d });
                    }
                }
            }
            let b = best.unwrap();
            pool.retain(|&j| j != b.claimed);
            sets[c].push(b.claimed);
            claims.push(b);
        }
    }
    claims
}

/// Same-class nearest-neighbor rate over `members` (ascending) from a full
/// distance matrix; ties go to the first member.
pub fn pnn_brute_force(features: &FeatureMatrix, labels: &[usize], members: &[usize]) -> f64 {
    let m = members.len();
    let mut dist = vec![vec![f64::INFINITY; m]; m];
    for a in 0..m {
        for b in 0..m {
            if a != b {
                dist[a][b] = sq_dist(features.row(members[a]), features.row(members[b]));
            }
        }
    }
    let mut hits = 0;
    for a in 0..m {
        let mut nn = usize::MAX;
        let mut nd = f64::INFINITY;
        for b in 0..m {
            if dist[a][b] < nd {
                nd = dist[a][b];
                nn = b;
            }
        }
        if labels[members[nn]] == labels[members[a]] {
            hits += 1;
        }
    }
    hits as f64 / m as f64
}
