use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Feature rows with dense integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.rows_by_class().len()
    }

    /// Row indices grouped by label, labels ascending, rows ascending.
    pub fn rows_by_class(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            map.entry(l).or_default().push(i);
        }
        map
    }
}

/// Rows that episodes draw supports and queries from, and rows that may serve
/// as unlabeled propagation candidates, over one combined feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeData {
    pub data: Dataset,
    pub episode_rows: Vec<usize>,
    pub pool_rows: Vec<usize>,
}

impl EpisodeData {
    /// Episodes and pool both come from the same rows; the pool of a task is
    /// every row that is neither support nor query.
    pub fn single_split(data: Dataset) -> Self {
        let all: Vec<usize> = (0..data.len()).collect();
        Self {
            data,
            episode_rows: all.clone(),
            pool_rows: all,
        }
    }

    /// Episodes come from `test`; the pool is the (labels ignored) `train` split.
    pub fn with_unlabeled(test: Dataset, train: Dataset) -> Result<Self> {
        if test.dim() != train.dim() {
            return Err(Error::Consistency(format!(
                "test features have dimension {}, train features {}",
                test.dim(),
                train.dim()
            )));
        }
        let n_test = test.len();
        let n_train = train.len();
        let dim = test.dim();
        let mut values = test.features.into_vec();
        values.extend(train.features.into_vec());
        let features = FeatureMatrix::new(n_test + n_train, dim, values)?;
        let mut labels = test.labels;
        labels.extend(train.labels);
        Ok(Self {
            data: Dataset { features, labels },
            episode_rows: (0..n_test).collect(),
            pool_rows: (n_test..n_test + n_train).collect(),
        })
    }

    pub fn episode_rows_by_class(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in &self.episode_rows {
            map.entry(self.data.labels[i]).or_default().push(i);
        }
        map
    }

    pub fn l2_normalized(&self) -> Self {
        Self {
            data: Dataset {
                features: self.data.features.l2_normalized(),
                labels: self.data.labels.clone(),
            },
            episode_rows: self.episode_rows.clone(),
            pool_rows: self.pool_rows.clone(),
        }
    }
}
