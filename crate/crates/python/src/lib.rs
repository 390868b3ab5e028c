//! Python bindings: graphs, the flattening pipeline, metrics, the kNN and
//! external-process backends, and experiment runs.
//!
//! Arrays cross the boundary as float64 numpy arrays; labels as uint8.

use std::path::PathBuf;
use std::time::Duration;

use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray1, PyReadonlyArray2};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyTimeoutError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

use flatgad::backend::{predict_external, predict_knn, InContextTask, DEFAULT_K_NEIGHBORS};
use flatgad::error::Error;
use flatgad::eval::config::ExperimentConfig;
use flatgad::eval::experiment::{self, EvalConfig, FlattenConfig, HopOrder};
use flatgad::eval::report::EvalReport;
use flatgad::eval::{metrics, split, synth};
use flatgad::graph::{self, FeatureMatrix, LabelVector};
use flatgad::spectral::{self, EmbeddingOptions, LaplacianOperator, DEFAULT_ZERO_TOL};
use flatgad::structure::{self, PageRankConfig};
use flatgad::table::FeatureGroups;
use flatgad::wavelet;

type Vector<'py> = Bound<'py, PyArray1<f64>>;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Stream(_) => PyOSError::new_err(e.to_string()),
        Error::BackendTimeout { .. } => PyTimeoutError::new_err(e.to_string()),
        Error::EigenNoConvergence { .. }
        | Error::PageRankNoConvergence { .. }
        | Error::BackendFailed { .. }
        | Error::BackendOutput { .. }
        | Error::ScoreOutOfRange { .. }
        | Error::ScoreCount { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn features(x: PyReadonlyArray2<'_, f64>) -> PyResult<FeatureMatrix> {
    FeatureMatrix::new(x.as_array().to_owned()).map_err(to_py)
}

fn labels(y: PyReadonlyArray1<'_, u8>) -> PyResult<LabelVector> {
    LabelVector::new(y.as_array().to_vec()).map_err(to_py)
}

fn order_arg(order: &Bound<'_, PyAny>) -> PyResult<HopOrder> {
    if let Ok(c) = order.extract::<usize>() {
        return Ok(HopOrder::Fixed(c));
    }
    match order.extract::<String>()?.as_str() {
        "auto" => Ok(HopOrder::Auto),
        other => Err(PyValueError::new_err(format!("order must be an int or \"auto\", got {other:?}"))),
    }
}

/// Undirected, unweighted graph in CSR form.
#[pyclass(name = "Graph", module = "flatgad", frozen)]
struct PyGraph(graph::Graph);

#[pymethods]
impl PyGraph {
    /// `Graph(n, edges)` with `edges` a sequence of `(u, v)` pairs.
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        graph::Graph::from_edges(n, edges).map(PyGraph).map_err(to_py)
    }

    /// Reads a whitespace-separated edge list over nodes `0..n`.
    #[staticmethod]
    fn from_edge_list(path: PathBuf, n: usize) -> PyResult<Self> {
        graph::Graph::load_edge_list_file(&path, n).map(PyGraph).map_err(to_py)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.0.edge_count()
    }

    fn degree<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<usize>> {
        self.0.degree().to_vec().into_pyarray(py)
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<u32>> {
        if v >= self.0.node_count() {
            return Err(PyValueError::new_err(format!("node {v} out of range")));
        }
        Ok(self.0.neighbors(v).to_vec())
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().collect()
    }

    fn adjacency_matvec<'py>(&self, py: Python<'py>, x: PyReadonlyArray1<'_, f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let x = x.as_array().to_vec();
        Ok(self.0.adjacency_matvec(&x).map_err(to_py)?.into_pyarray(py))
    }

    /// `L x` for the symmetric normalized Laplacian.
    fn laplacian_matvec<'py>(&self, py: Python<'py>, x: PyReadonlyArray1<'_, f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let x = x.as_array().to_vec();
        let y = LaplacianOperator::new(&self.0).matvec(&x).map_err(to_py)?;
        Ok(y.into_pyarray(py))
    }

    /// `(count, component id per node)`.
    fn connected_components<'py>(&self, py: Python<'py>) -> (usize, Bound<'py, PyArray1<usize>>) {
        let (count, comp) = self.0.connected_components();
        (count, comp.into_pyarray(py))
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.0.node_count(), self.0.edge_count())
    }
}

/// Eigenvectors for the `k` smallest non-zero Laplacian eigenvalues.
///
/// Returns a dict with `vectors` (n x k), `eigenvalues`, `zero_pairs` and
/// `padded`.
#[pyfunction]
#[pyo3(signature = (g, k, zero_tol = DEFAULT_ZERO_TOL, seed = 0))]
fn laplacian_embeddings<'py>(
    py: Python<'py>,
    g: &PyGraph,
    k: usize,
    zero_tol: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = EmbeddingOptions {
        zero_tol,
        seed,
        ..EmbeddingOptions::new(k)
    };
    let e = py
        .detach(|| spectral::laplacian_embeddings_with(&g.0, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("vectors", e.vectors.into_pyarray(py))?;
    d.set_item("eigenvalues", e.eigenvalues.into_pyarray(py))?;
    d.set_item("zero_pairs", e.zero_pairs)?;
    d.set_item("padded", e.padded)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (g, damping = 0.85, tol = 1e-10, max_iter = 200))]
fn pagerank<'py>(
    py: Python<'py>,
    g: &PyGraph,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let cfg = PageRankConfig {
        damping,
        tol,
        max_iter,
    };
    Ok(structure::pagerank(&g.0, &cfg).map_err(to_py)?.into_pyarray(py))
}

/// `(degree, pagerank)`; degree is `ln(1 + deg)` when `log_degree` is set.
#[pyfunction]
#[pyo3(signature = (g, log_degree = false))]
fn structural_characteristics<'py>(
    py: Python<'py>,
    g: &PyGraph,
    log_degree: bool,
) -> PyResult<(Vector<'py>, Vector<'py>)> {
    let s = structure::structural_characteristics_with(&g.0, &PageRankConfig::default(), log_degree)
        .map_err(to_py)?;
    Ok((s.degree.into_pyarray(py), s.pagerank.into_pyarray(py)))
}

/// `W_{p,q} X` for one Beta wavelet.
#[pyfunction]
fn apply_wavelet<'py>(
    py: Python<'py>,
    g: &PyGraph,
    x: PyReadonlyArray2<'_, f64>,
    p: usize,
    q: usize,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let x = features(x)?;
    Ok(wavelet::apply_wavelet(&g.0, &x, p, q).map_err(to_py)?.into_pyarray(py))
}

/// The `order + 1` filtered copies of `x`, lowest-pass first.
#[pyfunction]
fn wavelet_bank<'py>(
    py: Python<'py>,
    g: &PyGraph,
    x: PyReadonlyArray2<'_, f64>,
    order: usize,
) -> PyResult<Vec<Bound<'py, PyArray2<f64>>>> {
    let x = features(x)?;
    let bank = py.detach(|| wavelet::wavelet_bank(&g.0, &x, order)).map_err(to_py)?;
    Ok(bank.blocks.into_iter().map(|b| b.into_pyarray(py)).collect())
}

/// Augmented table `(values, column_names)` for a fixed filter-bank order.
#[pyfunction]
#[pyo3(signature = (g, x, k = 16, order = 2, mask = "all", standardize = false, zero_tol = DEFAULT_ZERO_TOL, log_degree = false))]
#[allow(clippy::too_many_arguments)]
fn flatten<'py>(
    py: Python<'py>,
    g: &PyGraph,
    x: PyReadonlyArray2<'_, f64>,
    k: usize,
    order: usize,
    mask: &str,
    standardize: bool,
    zero_tol: f64,
    log_degree: bool,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Vec<String>)> {
    let x = features(x)?;
    let cfg = FlattenConfig {
        embedding: EmbeddingOptions {
            zero_tol,
            ..EmbeddingOptions::new(k)
        },
        order: HopOrder::Fixed(order),
        mask: mask.parse::<FeatureGroups>().map_err(to_py)?,
        standardize,
        log_degree,
        ..FlattenConfig::default()
    };
    let table = py.detach(|| experiment::flatten(&g.0, &x, &cfg, order)).map_err(to_py)?;
    let names = table.column_names();
    Ok((table.values().to_owned().into_pyarray(py), names))
}

#[pyfunction]
fn auroc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    metrics::auroc(&scores, &labels).map_err(to_py)
}

#[pyfunction]
fn auprc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    metrics::auprc(&scores, &labels).map_err(to_py)
}

fn task(
    train_x: PyReadonlyArray2<'_, f64>,
    train_y: PyReadonlyArray1<'_, u8>,
    test_x: PyReadonlyArray2<'_, f64>,
) -> PyResult<InContextTask> {
    InContextTask::from_matrices(
        train_x.as_array().to_owned(),
        train_y.as_array().to_vec(),
        test_x.as_array().to_owned(),
    )
    .map_err(to_py)
}

/// Reference in-context scores: fraction of anomalies among the nearest
/// labeled rows.
#[pyfunction]
#[pyo3(signature = (train_x, train_y, test_x, k_neighbors = DEFAULT_K_NEIGHBORS))]
fn knn_scores<'py>(
    py: Python<'py>,
    train_x: PyReadonlyArray2<'_, f64>,
    train_y: PyReadonlyArray1<'_, u8>,
    test_x: PyReadonlyArray2<'_, f64>,
    k_neighbors: usize,
) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let t = task(train_x, train_y, test_x)?;
    let s = py.detach(|| predict_knn(&t, k_neighbors)).map_err(to_py)?;
    Ok(s.into_vec().into_pyarray(py))
}

/// Scores from an external program; `command` may use the placeholders
/// `{train_x} {train_y} {test_x} {out}`.
#[pyfunction]
#[pyo3(signature = (train_x, train_y, test_x, command, timeout = 600.0, workdir = None))]
fn external_scores<'py>(
    py: Python<'py>,
    train_x: PyReadonlyArray2<'_, f64>,
    train_y: PyReadonlyArray1<'_, u8>,
    test_x: PyReadonlyArray2<'_, f64>,
    command: &str,
    timeout: f64,
    workdir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyArray1<f64>>> {
    if timeout.is_nan() || timeout <= 0.0 {
        return Err(PyValueError::new_err("timeout must be positive"));
    }
    let t = task(train_x, train_y, test_x)?;
    let s = py
        .detach(|| predict_external(&t, command, workdir.as_deref(), Duration::from_secs_f64(timeout)))
        .map_err(to_py)?;
    Ok(s.into_vec().into_pyarray(py))
}

/// Synthetic dataset with injected anomalies, as a dict with `graph`,
/// `features` and `labels`.
#[pyfunction]
#[pyo3(signature = (n = 1000, d = 8, attach = 3, homophily = 0.5, contextual = 25, structural = 25, clique_size = 5, candidate_pool = 50, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn synthetic_dataset<'py>(
    py: Python<'py>,
    n: usize,
    d: usize,
    attach: usize,
    homophily: f64,
    contextual: usize,
    structural: usize,
    clique_size: usize,
    candidate_pool: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = synth::SynthConfig {
        n,
        d,
        attach,
        homophily,
        injection: synth::InjectionConfig {
            n_contextual: contextual,
            n_structural: structural,
            clique_size,
            candidate_pool,
            seed,
        },
    };
    let ds = synth::synthetic_dataset(&cfg).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("features", ds.features.into_inner().into_pyarray(py))?;
    out.set_item("labels", ds.labels.as_slice().to_vec().into_pyarray(py))?;
    out.set_item("graph", Py::new(py, PyGraph(ds.graph))?)?;
    Ok(out)
}

/// `(labeled_ids, labeled_y, test_ids)` for one seeded split.
#[pyfunction]
#[pyo3(signature = (labels, n_labeled = 100, n_anomalies = 20, seed = 0))]
fn generate_split<'py>(
    py: Python<'py>,
    labels: PyReadonlyArray1<'_, u8>,
    n_labeled: usize,
    n_anomalies: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyTuple>> {
    let y = self::labels(labels)?;
    let s = split::generate_split(&y, n_labeled, n_anomalies, seed).map_err(to_py)?;
    PyTuple::new(
        py,
        [
            s.labeled_ids.into_pyarray(py).into_any(),
            s.labeled_y.into_pyarray(py).into_any(),
            s.test_ids.into_pyarray(py).into_any(),
        ],
    )
}

fn report_dict<'py>(py: Python<'py>, r: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mask", r.mask.to_string())?;
    d.set_item("completed", r.completed())?;
    d.set_item("seeds", r.seeds.iter().map(|s| s.seed).collect::<Vec<_>>())?;
    d.set_item("auroc", r.seeds.iter().map(|s| s.auroc).collect::<Vec<_>>())?;
    d.set_item("auprc", r.seeds.iter().map(|s| s.auprc).collect::<Vec<_>>())?;
    d.set_item("order", r.seeds.iter().map(|s| s.order).collect::<Vec<_>>())?;
    d.set_item("auroc_mean", r.auroc().map(|m| m.mean))?;
    d.set_item("auprc_mean", r.auprc().map(|m| m.mean))?;
    d.set_item("report", r.render(false))?;
    Ok(d)
}

/// Flatten and score a dataset over seeded splits with the kNN backend.
/// Returns per-seed metrics, their means and the rendered report.
#[pyfunction]
#[pyo3(signature = (g, x, labels, k = 16, order = None, mask = "all", standardize = false, seeds = 10, n_labeled = 100, n_anomalies = 20, k_neighbors = DEFAULT_K_NEIGHBORS, ablate = false))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    g: &PyGraph,
    x: PyReadonlyArray2<'_, f64>,
    labels: PyReadonlyArray1<'_, u8>,
    k: usize,
    order: Option<&Bound<'_, PyAny>>,
    mask: &str,
    standardize: bool,
    seeds: u64,
    n_labeled: usize,
    n_anomalies: usize,
    k_neighbors: usize,
    ablate: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let ds = synth::Dataset::new(g.0.clone(), features(x)?, self::labels(labels)?).map_err(to_py)?;
    let flatten = FlattenConfig {
        embedding: EmbeddingOptions::new(k),
        order: order.map(order_arg).transpose()?.unwrap_or(HopOrder::Auto),
        mask: mask.parse::<FeatureGroups>().map_err(to_py)?,
        standardize,
        ..FlattenConfig::default()
    };
    let eval = EvalConfig {
        seeds: (0..seeds).collect(),
        n_labeled,
        n_anomalies,
        ..EvalConfig::default()
    };
    let backend = flatgad::backend::KnnBackend { k_neighbors };
    let reports = py
        .detach(|| -> flatgad::error::Result<Vec<EvalReport>> {
            let splits = experiment::splits_for(&ds, &eval)?;
            if ablate {
                experiment::run_ablation(&ds, &splits, &flatten, &eval, &backend)
            } else {
                Ok(vec![experiment::run_experiment(&ds, &splits, &flatten, &eval, &backend)?])
            }
        })
        .map_err(to_py)?;
    if ablate {
        let list = reports.iter().map(|r| report_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
        Ok(list.into_pyobject(py)?.into_any())
    } else {
        Ok(report_dict(py, &reports[0])?.into_any())
    }
}

/// Runs the experiment described by a TOML config file; returns the
/// rendered report (one per ablation step when `ablate` is set).
#[pyfunction]
#[pyo3(name = "bench", signature = (config, ablate = false))]
fn bench_config(py: Python<'_>, config: PathBuf, ablate: bool) -> PyResult<Vec<String>> {
    py.detach(|| -> flatgad::error::Result<Vec<String>> {
        let cfg = ExperimentConfig::load(&config)?;
        let ds = cfg.load_dataset()?;
        let splits = cfg.splits(&ds)?;
        let backend = cfg.backend.build();
        let reports = if ablate {
            experiment::run_ablation(&ds, &splits, &cfg.flatten, &cfg.eval, backend.as_ref())?
        } else {
            vec![experiment::run_experiment(&ds, &splits, &cfg.flatten, &cfg.eval, backend.as_ref())?]
        };
        Ok(reports.iter().map(|r| r.render(false)).collect())
    })
    .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "flatgad")]
pub fn flatgad_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(laplacian_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(pagerank, m)?)?;
    m.add_function(wrap_pyfunction!(structural_characteristics, m)?)?;
    m.add_function(wrap_pyfunction!(apply_wavelet, m)?)?;
    m.add_function(wrap_pyfunction!(wavelet_bank, m)?)?;
    m.add_function(wrap_pyfunction!(flatten, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(auprc, m)?)?;
    m.add_function(wrap_pyfunction!(knn_scores, m)?)?;
    m.add_function(wrap_pyfunction!(external_scores, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_split, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(bench_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
