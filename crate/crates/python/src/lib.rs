//! Python bindings for the `kprop` crate. Feature matrices cross the boundary
//! as lists of rows, labels and index sets as lists of ints.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kprop::classifiers::{default_subspace_dim, Prototypes, Subspaces};
use kprop::episodes::evaluate_tasks;
use kprop::featio;
use kprop::{
    ClassifierVerdict, Dataset, EpisodeData, EvalOptions, FeatureMatrix, Kernel, LabeledSets, Method,
    SynthConfig,
};

fn err(e: kprop::Error) -> PyErr {
    match e {
        kprop::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(&rows).map_err(err)
}

fn rows(m: &FeatureMatrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

fn kernel(sigma: f64, linear: bool) -> PyResult<Kernel> {
    if linear {
        Ok(Kernel::Linear)
    } else {
        Kernel::gaussian(sigma).map_err(err)
    }
}

fn verdict(v: ClassifierVerdict) -> (usize, Vec<f64>) {
    (v.predicted_class, v.per_class_scores)
}

fn support_matrices(sets: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<FeatureMatrix>> {
    sets.into_iter().map(matrix).collect()
}

/// Kernel PCA model of one class's labeled points.
#[pyclass(name = "KpcaModel", module = "kprop_py", frozen)]
struct PyKpcaModel {
    inner: kprop::KpcaModel,
}

#[pymethods]
impl PyKpcaModel {
    #[new]
    #[pyo3(signature = (points, components, sigma = 16.0, linear = false))]
    fn new(points: Vec<Vec<f64>>, components: usize, sigma: f64, linear: bool) -> PyResult<Self> {
        let inner = kprop::fit_kpca(&matrix(points)?, kernel(sigma, linear)?, components).map_err(err)?;
        Ok(Self { inner })
    }

    /// Reconstruction error of `z`, clamped at zero.
    fn reconstruction_error(&self, z: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.reconstruction_error(&z).map_err(err)?.value())
    }

    /// Reconstruction error before clamping.
    fn raw_reconstruction_error(&self, z: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.reconstruction_error(&z).map_err(err)?.raw)
    }

    fn project(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.project(&z).map_err(err)
    }

    fn with_components(&self, components: usize) -> Self {
        Self {
            inner: self.inner.with_components(components),
        }
    }

    #[getter]
    fn components(&self) -> usize {
        self.inner.q_effective()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "KpcaModel(points={}, components={}, retained={})",
            self.inner.train_points().rows(),
            self.inner.q_effective(),
            self.inner.retained()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (x, y, sigma = 16.0))]
fn gaussian_kernel(x: Vec<f64>, y: Vec<f64>, sigma: f64) -> PyResult<f64> {
    let cfg = kprop::KernelConfig::new(sigma).map_err(err)?;
    kprop::gaussian_kernel(&x, &y, &cfg).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (points, sigma = 16.0, linear = false))]
fn kernel_matrix(points: Vec<Vec<f64>>, sigma: f64, linear: bool) -> PyResult<Vec<Vec<f64>>> {
    let k = kprop::kernel_matrix(&matrix(points)?, &kernel(sigma, linear)?).map_err(err)?;
    Ok((0..k.order()).map(|i| k.row(i).to_vec()).collect())
}

/// Returns `(expanded_sets, claims)` where each claim is
/// `(class, claimed_index, source_index, distance)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn propagate_labels(
    features: Vec<Vec<f64>>,
    support: Vec<Vec<usize>>,
    pool: Vec<usize>,
    extra_per_class: usize,
) -> PyResult<(Vec<Vec<usize>>, Vec<(usize, usize, usize, f64)>)> {
    let sets = LabeledSets::new(support).map_err(err)?;
    let result = kprop::propagate_labels(&matrix(features)?, &sets, &pool, extra_per_class).map_err(err)?;
    let claims = result
        .claims
        .iter()
        .map(|c| (c.class, c.claimed, c.source, c.distance))
        .collect();
    Ok((result.expanded.into_inner(), claims))
}

/// Lowest reconstruction error wins; returns `(class, scores)`.
#[pyfunction]
fn classify_kprop(models: Vec<PyRef<'_, PyKpcaModel>>, z: Vec<f64>) -> PyResult<(usize, Vec<f64>)> {
    let models: Vec<kprop::KpcaModel> = models.iter().map(|m| m.inner.clone()).collect();
    Ok(verdict(kprop::classify_kprop(&models, &z).map_err(err)?))
}

#[pyfunction]
fn classify_prototype(supports: Vec<Vec<Vec<f64>>>, z: Vec<f64>) -> PyResult<(usize, Vec<f64>)> {
    let p = Prototypes::fit(&support_matrices(supports)?).map_err(err)?;
    Ok(verdict(p.classify(&z).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (supports, z, dim = None))]
fn classify_subspace(supports: Vec<Vec<Vec<f64>>>, z: Vec<f64>, dim: Option<usize>) -> PyResult<(usize, Vec<f64>)> {
    let sets = support_matrices(supports)?;
    let dim = dim.unwrap_or_else(|| default_subspace_dim(sets.first().map_or(1, FeatureMatrix::rows)));
    let s = Subspaces::fit(&sets, dim).map_err(err)?;
    Ok(verdict(s.classify(&z).map_err(err)?))
}

/// Trains softmax regression on the supports and classifies each query.
#[pyfunction]
fn classify_linear(supports: Vec<Vec<Vec<f64>>>, queries: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    let model = kprop::train_linear(&support_matrices(supports)?).map_err(err)?;
    queries
        .iter()
        .map(|z| Ok(kprop::classify_linear(&model, z).map_err(err)?.predicted_class))
        .collect()
}

#[pyfunction]
#[pyo3(signature = (features, labels, classes_per_trial, trials = 100, seed = 0))]
fn estimate_pnn<'py>(
    py: Python<'py>,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes_per_trial: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let est = kprop::estimate_pnn(&matrix(features)?, &labels, classes_per_trial, trials, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mean", est.mean)?;
    d.set_item("sd", est.sd)?;
    d.set_item("trials", est.trials)?;
    d.set_item("classes_per_trial", est.classes_per_trial)?;
    d.set_item("trial_values", est.trial_values)?;
    Ok(d)
}

#[pyfunction]
fn distance_stats<'py>(py: Python<'py>, features: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
    let s = kprop::pairwise_distance_stats(&matrix(features)?, &labels).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("intra_mean", s.intra_mean)?;
    d.set_item("intra_sd", s.intra_sd)?;
    d.set_item("intra_count", s.intra_count)?;
    d.set_item("inter_mean", s.inter_mean)?;
    d.set_item("inter_sd", s.inter_sd)?;
    d.set_item("inter_count", s.inter_count)?;
    Ok(d)
}

/// Returns `(features, labels, achieved_pnn)`.
#[pyfunction]
#[pyo3(signature = (
    classes = 10, points_per_class = 100, dim = 32, walk_dim = 10,
    step = 10.0, dispersion = 10.0, chains_per_class = 25, seed = 0
))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn generate_synthetic(
    classes: usize,
    points_per_class: usize,
    dim: usize,
    walk_dim: usize,
    step: f64,
    dispersion: f64,
    chains_per_class: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>, f64)> {
    let cfg = SynthConfig {
        classes,
        points_per_class,
        dim,
        walk_dim,
        step,
        dispersion,
        chains_per_class,
        seed,
    };
    let d = kprop::generate_sparse_graph_dataset(&cfg).map_err(err)?;
    Ok((rows(&d.features), d.labels, d.achieved_pnn))
}

fn episode_data(features: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<EpisodeData> {
    Ok(EpisodeData::single_split(Dataset::new(matrix(features)?, labels).map_err(err)?))
}

fn options(shot: usize, way: usize, tasks: usize, seed: u64, extra_labels: Option<usize>) -> EvalOptions {
    EvalOptions {
        way: Some(way),
        shot,
        tasks: Some(tasks),
        seed,
        extra_labels,
        ..Default::default()
    }
}

/// Episodic evaluation of one method; returns a dict with `mean`, `se`,
/// `accuracies` and the resolved `components`, `extra_labels` and `sigma`.
#[pyfunction]
#[pyo3(signature = (features, labels, method = "kprop", shot = 1, way = 5, tasks = 100, seed = 0, extra_labels = None, workers = 0))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    method: &str,
    shot: usize,
    way: usize,
    tasks: usize,
    seed: u64,
    extra_labels: Option<usize>,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let method: Method = method.parse().map_err(err)?;
    let data = episode_data(features, labels)?;
    let cfg = options(shot, way, tasks, seed, extra_labels).resolve().map_err(err)?;
    let report = py
        .detach(|| {
            let tasks = kprop::episodes::sample_tasks(&data, &cfg)?;
            evaluate_tasks(method, &cfg, &tasks, &data, workers)
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("method", report.method.id())?;
    d.set_item("mean", report.mean)?;
    d.set_item("se", report.se)?;
    d.set_item("accuracies", report.accuracies)?;
    d.set_item("components", report.config.components)?;
    d.set_item("extra_labels", report.config.extra_labels)?;
    d.set_item("sigma", report.config.sigma)?;
    Ok(d)
}

/// K-Prop accuracy for each extra-label count; returns `[(m, mean, se), ...]`.
#[pyfunction]
#[pyo3(signature = (features, labels, extra_labels, shot = 1, way = 5, tasks = 100, seed = 0, workers = 0))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    extra_labels: Vec<usize>,
    shot: usize,
    way: usize,
    tasks: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Vec<(usize, f64, f64)>> {
    let data = episode_data(features, labels)?;
    let cfg = options(shot, way, tasks, seed, None).resolve().map_err(err)?;
    let points = py
        .detach(|| kprop::sweep_extra_labels(&data, &cfg, &extra_labels, workers))
        .map_err(err)?;
    Ok(points.into_iter().map(|p| (p.extra_labels, p.mean, p.se)).collect())
}

#[pyfunction]
fn load_features(path: &str) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&featio::load_features(path).map_err(err)?))
}

#[pyfunction]
fn save_features(path: &str, features: Vec<Vec<f64>>) -> PyResult<()> {
    featio::save_features(path, &matrix(features)?).map_err(err)
}

#[pyfunction]
fn load_labels(path: &str) -> PyResult<Vec<usize>> {
    featio::load_labels(path).map_err(err)
}

#[pyfunction]
fn save_labels(path: &str, labels: Vec<usize>) -> PyResult<()> {
    featio::save_labels(path, &labels).map_err(err)
}

#[pymodule]
fn kprop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKpcaModel>()?;
    m.add_function(wrap_pyfunction!(gaussian_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(propagate_labels, m)?)?;
    m.add_function(wrap_pyfunction!(classify_kprop, m)?)?;
    m.add_function(wrap_pyfunction!(classify_prototype, m)?)?;
    m.add_function(wrap_pyfunction!(classify_subspace, m)?)?;
    m.add_function(wrap_pyfunction!(classify_linear, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_pnn, m)?)?;
    m.add_function(wrap_pyfunction!(distance_stats, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(load_features, m)?)?;
    m.add_function(wrap_pyfunction!(save_features, m)?)?;
    m.add_function(wrap_pyfunction!(load_labels, m)?)?;
    m.add_function(wrap_pyfunction!(save_labels, m)?)?;
    Ok(())
}
