//! Nearest-neighbor label propagation over a shared unlabeled pool.
//!
//! Classes take turns in ascending id order. On its turn a class claims the pool
//! point closest to any of its currently labeled points; the point leaves the
//! pool immediately, so no point is ever labeled twice.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, FeatureMatrix};

/// Per-class point indices into a shared feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSets {
    classes: Vec<Vec<usize>>,
}

impl LabeledSets {
    /// Rejects index lists that share a point.
    pub fn new(classes: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for members in &classes {
            for &i in members {
                if !seen.insert(i) {
                    return Err(Error::Precondition(format!(
                        "point {i} appears in more than one labeled set"
                    )));
                }
            }
        }
        Ok(Self { classes })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, c: usize) -> &[usize] {
        &self.classes[c]
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn into_inner(self) -> Vec<Vec<usize>> {
        self.classes
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }
}

/// One propagation step: `class` labeled `claimed`, whose nearest labeled point was `source`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub class: usize,
    pub claimed: usize,
    pub source: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    pub expanded: LabeledSets,
    pub claims: Vec<Claim>,
}

/// Nearest labeled point of one class for one pool point.
#[derive(Clone, Copy)]
struct Nearest {
    dist2: f64,
    source: usize,
}

impl Nearest {
    fn offer(&mut self, dist2: f64, source: usize) {
        if dist2 < self.dist2 || (dist2 == self.dist2 && source < self.source) {
            self.dist2 = dist2;
            self.source = source;
        }
    }
}

/// Grows each class by up to `extra_per_class` points drawn from `pool`.
///
/// Ranking uses squared Euclidean distance; ties go to the lowest pool index,
/// and among equidistant labeled points the lowest index is reported as source.
pub fn propagate_labels(
    features: &FeatureMatrix,
    support: &LabeledSets,
    pool: &[usize],
    extra_per_class: usize,
) -> Result<PropagationResult> {
    let n = features.rows();
    let mut labeled: HashSet<usize> = HashSet::new();
    for (c, members) in support.classes().iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Precondition(format!("class {c} has no labeled points")));
        }
        for &i in members {
            if i >= n {
                return Err(Error::Shape(format!("support index {i} out of range ({n} points)")));
            }
            labeled.insert(i);
        }
    }
    let mut pool: Vec<usize> = pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    for &j in &pool {
        if j >= n {
            return Err(Error::Shape(format!("pool index {j} out of range ({n} points)")));
        }
        if labeled.contains(&j) {
            return Err(Error::Disjointness(j));
        }
    }

    let mut expanded = support.classes().to_vec();
    let mut claims = Vec::new();
    if extra_per_class == 0 || pool.is_empty() {
        return Ok(PropagationResult {
            expanded: LabeledSets { classes: expanded },
            claims,
        });
    }

    // nearest[c][p]: closest labeled point of class c to pool[p]
    let mut nearest: Vec<Vec<Nearest>> = expanded
        .iter()
        .map(|members| {
            pool.iter()
                .map(|&j| {
                    let mut best = Nearest {
                        dist2: f64::INFINITY,
                        source: usize::MAX,
                    };
                    for &i in members {
                        best.offer(squared_distance(features.row(i), features.row(j)), i);
                    }
                    best
                })
                .collect()
        })
        .collect();
    let mut available = vec![true; pool.len()];
    let mut remaining = pool.len();

    'rounds: for _ in 0..extra_per_class {
        for c in 0..expanded.len() {
            if remaining == 0 {
                break 'rounds;
            }
            let mut best: Option<usize> = None;
            for (p, near) in nearest[c].iter().enumerate() {
                if !available[p] {
                    continue;
                }
                // pool is sorted, so strict < keeps the lowest index on ties
                if best.is_none_or(|b| near.dist2 < nearest[c][b].dist2) {
                    best = Some(p);
                }
            }
            let p = best.expect("remaining > 0");
            let j = pool[p];
            let near = nearest[c][p];
            claims.push(Claim {
                class: c,
                claimed: j,
                source: near.source,
                distance: near.dist2.sqrt(),
            });
            available[p] = false;
            remaining -= 1;
            expanded[c].push(j);
            let xj = features.row(j);
            for (q, slot) in nearest[c].iter_mut().enumerate() {
                if available[q] {
                    slot.offer(squared_distance(xj, features.row(pool[q])), j);
                }
            }
        }
    }

    Ok(PropagationResult {
        expanded: LabeledSets { classes: expanded },
        claims,
    })
}
