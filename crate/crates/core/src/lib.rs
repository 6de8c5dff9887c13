//! Few-shot classification in a frozen feature space: nearest-neighbor label
//! propagation followed by per-class kernel PCA, scored by reconstruction error.
//!
//! The crate also carries the evaluation-time baselines (nearest prototype,
//! affine subspace, softmax regression), the nearest-neighbor purity and
//! distance measurements, an episodic evaluation harness and a generator for
//! synthetic chain-structured feature sets.

pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod episodes;
pub mod error;
pub mod featio;
pub mod geometry;
pub mod kernels;
pub mod kpca;
pub mod matrix;
pub mod numerics;
pub mod propagation;
pub mod rng;
pub mod synthgen;

pub use classifiers::{
    classify_kprop, classify_linear, classify_prototype, classify_subspace, train_linear,
    ClassifierVerdict, LinearModel,
};
pub use dataset::{Dataset, EpisodeData};
pub use episodes::{
    aggregate, evaluate_method, sample_task, sweep_extra_labels, EvalOptions, EvalReport,
    FewShotTask, Method, ResolvedConfig,
};
pub use error::{Error, Result};
pub use geometry::{estimate_pnn, pairwise_distance_stats, DistanceStats, PnnEstimate};
pub use kernels::{center_kernel_matrix, gaussian_kernel, kernel_matrix, Kernel, KernelConfig};
pub use kpca::{fit_kpca, KpcaModel, Score};
pub use matrix::FeatureMatrix;
pub use numerics::{eigh_symmetric, thin_svd, EigenDecomposition, SymMatrix};
pub use propagation::{propagate_labels, LabeledSets, PropagationResult};
pub use synthgen::{generate_sparse_graph_dataset, SynthConfig, SynthDataset};
