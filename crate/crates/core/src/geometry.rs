//! Feature-space geometry: intra/inter-class distance statistics and the
//! probability that a point's nearest neighbor shares its class.

use std::collections::BTreeSet;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{euclidean_distance, squared_distance, FeatureMatrix};
use crate::rng::derive_rng;

/// Population mean and SD of pairwise Euclidean distances, split by whether
/// the pair shares a label. An empty partition reports zero mean and SD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub intra_mean: f64,
    pub intra_sd: f64,
    pub intra_count: usize,
    pub inter_mean: f64,
    pub inter_sd: f64,
    pub inter_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnnEstimate {
    pub mean: f64,
    /// Population SD over trials.
    pub sd: f64,
    pub trials: usize,
    pub classes_per_trial: usize,
    pub trial_values: Vec<f64>,
}

fn check_labels(features: &FeatureMatrix, labels: &[usize]) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(Error::Consistency(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    Ok(())
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn pairwise_distance_stats(features: &FeatureMatrix, labels: &[usize]) -> Result<DistanceStats> {
    check_labels(features, labels)?;
    if features.rows() < 2 {
        return Err(Error::EmptySet("need at least two points".into()));
    }
    let mut intra = Vec::new();
    let mut inter = Vec::new();
    for i in 0..features.rows() {
        for j in (i + 1)..features.rows() {
            let d = euclidean_distance(features.row(i), features.row(j));
            if labels[i] == labels[j] {
                intra.push(d);
            } else {
                inter.push(d);
            }
        }
    }
    if inter.is_empty() {
        return Err(Error::EmptySet(
            "all points share one class; inter-class partition is empty".into(),
        ));
    }
    let (intra_mean, intra_sd) = mean_sd(&intra);
    let (inter_mean, inter_sd) = mean_sd(&inter);
    Ok(DistanceStats {
        intra_mean,
        intra_sd,
        intra_count: intra.len(),
        inter_mean,
        inter_sd,
        inter_count: inter.len(),
    })
}

/// Fraction of `members` whose nearest other member (lowest index on ties)
/// carries the same label.
pub fn nearest_neighbor_hit_rate(features: &FeatureMatrix, labels: &[usize], members: &[usize]) -> f64 {
    if members.len() < 2 {
        return 0.0;
    }
    let hits = members
        .iter()
        .filter(|&&i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for &j in members {
                if j == i {
                    continue;
                }
                let d = squared_distance(features.row(i), features.row(j));
                if d < best.0 || (d == best.0 && j < best.1) {
                    best = (d, j);
                }
            }
            labels[best.1] == labels[i]
        })
        .count();
    hits as f64 / members.len() as f64
}

/// Each trial samples `classes_per_trial` labels without replacement, keeps
/// their points, and records the nearest-neighbor same-class rate. Trial `t`
/// draws from stream `t` of `seed`, so results do not depend on thread count.
pub fn estimate_pnn(
    features: &FeatureMatrix,
    labels: &[usize],
    classes_per_trial: usize,
    trials: usize,
    seed: u64,
) -> Result<PnnEstimate> {
    check_labels(features, labels)?;
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    if classes_per_trial == 0 {
        return Err(Error::Config("classes_per_trial must be positive".into()));
    }
    let distinct: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.len() < classes_per_trial {
        return Err(Error::Sampling(format!(
            "requested {classes_per_trial} classes but only {} are present",
            distinct.len()
        )));
    }
    let trial_values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = derive_rng(seed, t as u64);
            let picked: BTreeSet<usize> = index::sample(&mut rng, distinct.len(), classes_per_trial)
                .into_iter()
                .map(|i| distinct[i])
                .collect();
            let members: Vec<usize> = (0..labels.len()).filter(|&i| picked.contains(&labels[i])).collect();
            nearest_neighbor_hit_rate(features, labels, &members)
        })
        .collect();
    let (mean, sd) = mean_sd(&trial_values);
    Ok(PnnEstimate {
        mean,
        sd,
        trials,
        classes_per_trial,
        trial_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&values.iter().map(|v| [*v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn one_pair_inter_only() {
        let f = FeatureMatrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let s = pairwise_distance_stats(&f, &[0, 1]).unwrap();
        assert_eq!(s.inter_mean, 5.0);
        assert_eq!(s.inter_count, 1);
        assert_eq!(s.intra_count, 0);
        assert_eq!(s.intra_mean, 0.0);
    }

    #[test]
    fn collinear_three_points() {
        let s = pairwise_distance_stats(&line(&[0.0, 1.0, 3.0]), &[0, 0, 1]).unwrap();
        assert_eq!(s.intra_mean, 1.0);
        assert_eq!(s.inter_mean, 2.5);
        assert_eq!(s.intra_count, 1);
        assert_eq!(s.inter_count, 2);
        assert_eq!(s.inter_sd, 0.5);
    }

    #[test]
    fn duplicated_dataset_lowers_intra_mean() {
        let base = [0.0, 1.0, 3.0];
        let s1 = pairwise_distance_stats(&line(&base), &[0, 0, 1]).unwrap();
        let s2 = pairwise_distance_stats(&line(&[0.0, 1.0, 3.0, 0.0, 1.0, 3.0]), &[0, 0, 1, 0, 0, 1]).unwrap();
        assert!(s2.intra_mean < s1.intra_mean);
        assert_eq!(s2.inter_mean, s1.inter_mean);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(
            pairwise_distance_stats(&line(&[0.0, 1.0]), &[0, 0]),
            Err(Error::EmptySet(_))
        ));
    }

    #[test]
    fn one_dimensional_pnn_fixture() {
        let f = line(&[0.0, 1.0, 5.0, 10.0]);
        let e = estimate_pnn(&f, &[0, 0, 1, 1], 2, 1, 3).unwrap();
        assert_eq!(e.mean, 0.75);
        assert_eq!(e.sd, 0.0);
    }

    #[test]
    fn perfect_clustering() {
        let f = line(&[0.0, 0.1, 100.0, 100.1, 200.0, 200.2]);
        let e = estimate_pnn(&f, &[0, 0, 1, 1, 2, 2], 2, 20, 1).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.sd, 0.0);
    }

    #[test]
    fn too_few_classes() {
        let f = line(&[0.0, 1.0]);
        assert!(matches!(estimate_pnn(&f, &[0, 1], 5, 1, 0), Err(Error::Sampling(_))));
    }

    #[test]
    fn deterministic_and_bounded() {
        let f = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let labels = [0, 1, 2, 0, 1, 2, 0, 1, 2];
        let a = estimate_pnn(&f, &labels, 2, 30, 11).unwrap();
        let b = estimate_pnn(&f, &labels, 2, 30, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.sd <= 0.5);
        for v in &a.trial_values {
            // six points per trial
            assert_eq!((v * 6.0).round(), v * 6.0);
        }
    }
}
