//! Experiment configuration files (TOML).
//!
//! ```toml
//! [dataset]
//! edges = "edges.txt"
//! features = "features.csv"
//! labels = "labels.txt"
//! # splits = "splits.txt"
//!
//! [flatten]
//! k = 16
//! C = "auto"          # or 1, 2, 3
//! mask = "raw,lap,char,nbr"
//! standardize = false
//!
//! [backend]
//! kind = "knn"        # or "external"
//! k_neighbors = 5
//! # command = "python adapter.py {train_x} {train_y} {test_x} {out}"
//! # timeout = 600
//!
//! [eval]
//! seeds = 10
//! n_labeled = 100
//! n_anomalies = 20
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::backend::{
    ExternalBackend, InContextBackend, KnnBackend, DEFAULT_K_NEIGHBORS, DEFAULT_MAX_QUERY_ROWS,
};
use crate::error::{Error, Result};
use crate::eval::experiment::{splits_for, EvalConfig, FlattenConfig, HopOrder, DEFAULT_CV_FOLDS};
use crate::eval::split::{load_splits_file, SplitSpec};
use crate::eval::synth::Dataset;
use crate::spectral::{EmbeddingOptions, DEFAULT_ZERO_TOL};
use crate::table::FeatureGroups;
use crate::wavelet::MAX_ORDER;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: RawDataset,
    #[serde(default)]
    flatten: RawFlatten,
    #[serde(default)]
    backend: RawBackend,
    #[serde(default)]
    eval: RawEval,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    edges: PathBuf,
    features: PathBuf,
    labels: PathBuf,
    splits: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawOrder {
    Fixed(usize),
    Named(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawFlatten {
    k: usize,
    #[serde(rename = "C")]
    order: RawOrder,
    mask: String,
    standardize: bool,
    zero_tol: f64,
    log_degree: bool,
}

impl Default for RawFlatten {
    fn default() -> Self {
        RawFlatten {
            k: 16,
            order: RawOrder::Named("auto".into()),
            mask: "all".into(),
            standardize: false,
            zero_tol: DEFAULT_ZERO_TOL,
            log_degree: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawBackend {
    kind: String,
    k_neighbors: usize,
    command: Option<String>,
    workdir: Option<PathBuf>,
    timeout: f64,
    max_query_rows: usize,
    max_concurrent: usize,
}

impl Default for RawBackend {
    fn default() -> Self {
        RawBackend {
            kind: "knn".into(),
            k_neighbors: DEFAULT_K_NEIGHBORS,
            command: None,
            workdir: None,
            timeout: 600.0,
            max_query_rows: DEFAULT_MAX_QUERY_ROWS,
            max_concurrent: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawSeeds {
    Count(u64),
    List(Vec<u64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEval {
    seeds: RawSeeds,
    n_labeled: usize,
    n_anomalies: usize,
    cv_folds: usize,
}

impl Default for RawEval {
    fn default() -> Self {
        RawEval {
            seeds: RawSeeds::Count(10),
            n_labeled: 100,
            n_anomalies: 20,
            cv_folds: DEFAULT_CV_FOLDS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum BackendConfig {
    Knn { k_neighbors: usize },
    External(ExternalBackend),
}

impl BackendConfig {
    pub fn build(&self) -> Box<dyn InContextBackend> {
        match self {
            BackendConfig::Knn { k_neighbors } => Box::new(KnnBackend {
                k_neighbors: *k_neighbors,
            }),
            BackendConfig::External(e) => Box::new(e.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetPaths,
    pub flatten: FlattenConfig,
    pub backend: BackendConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let order = match raw.flatten.order {
            RawOrder::Named(s) if s == "auto" => HopOrder::Auto,
            RawOrder::Named(s) => match s.parse::<usize>() {
                Ok(c) => HopOrder::Fixed(c),
                Err(_) => return Err(Error::Config(format!("C must be \"auto\" or an integer, got {s:?}"))),
            },
            RawOrder::Fixed(c) => HopOrder::Fixed(c),
        };
        if let HopOrder::Fixed(c) = order {
            if c == 0 || c > MAX_ORDER {
                return Err(Error::Config(format!("C = {c} outside 1..={MAX_ORDER}")));
            }
        }
        let mask: FeatureGroups = raw.flatten.mask.parse()?;
        let flatten = FlattenConfig {
            embedding: EmbeddingOptions {
                zero_tol: raw.flatten.zero_tol,
                ..EmbeddingOptions::new(raw.flatten.k)
            },
            order,
            mask,
            standardize: raw.flatten.standardize,
            log_degree: raw.flatten.log_degree,
            ..FlattenConfig::default()
        };

        let b = raw.backend;
        let backend = match b.kind.as_str() {
            "knn" => BackendConfig::Knn {
                k_neighbors: b.k_neighbors,
            },
            "external" => {
                let command = b
                    .command
                    .ok_or_else(|| Error::Config("external backend needs a command".into()))?;
                if !(b.timeout > 0.0) {
                    return Err(Error::Config("backend timeout must be positive".into()));
                }
                BackendConfig::External(ExternalBackend {
                    command,
                    workdir: b.workdir.map(resolve),
                    timeout: Duration::from_secs_f64(b.timeout),
                    max_query_rows: b.max_query_rows,
                    max_concurrent: b.max_concurrent,
                })
            }
            other => return Err(Error::Config(format!("unknown backend kind {other:?}"))),
        };

        let seeds = match raw.eval.seeds {
            RawSeeds::Count(c) => (0..c).collect(),
            RawSeeds::List(l) => l,
        };
        let eval = EvalConfig {
            seeds,
            n_labeled: raw.eval.n_labeled,
            n_anomalies: raw.eval.n_anomalies,
            cv_folds: raw.eval.cv_folds,
        };

        Ok(ExperimentConfig {
            dataset: DatasetPaths {
                edges: resolve(raw.dataset.edges),
                features: resolve(raw.dataset.features),
                labels: resolve(raw.dataset.labels),
                splits: raw.dataset.splits.map(resolve),
            },
            flatten,
            backend,
            eval,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        Dataset::load(&self.dataset.edges, &self.dataset.features, &self.dataset.labels)
    }

    /// Fixed splits from the dataset's split file when configured, otherwise
    /// generated ones for each seed.
    pub fn splits(&self, ds: &Dataset) -> Result<Vec<SplitSpec>> {
        match &self.dataset.splits {
            Some(p) => load_splits_file(p, &ds.labels),
            None => splits_for(ds, &self.eval),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
edges = "e.txt"
features = "f.csv"
labels = "/abs/l.txt"
"#;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(c.dataset.edges, Path::new("/data/e.txt"));
        assert_eq!(c.dataset.labels, Path::new("/abs/l.txt"));
        assert_eq!(c.flatten.embedding.k, 16);
        assert_eq!(c.flatten.order, HopOrder::Auto);
        assert_eq!(c.flatten.mask, FeatureGroups::ALL);
        assert!(!c.flatten.standardize);
        assert!(matches!(c.backend, BackendConfig::Knn { k_neighbors: 5 }));
        assert_eq!(c.eval.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!((c.eval.n_labeled, c.eval.n_anomalies), (100, 20));
    }

    #[test]
    fn full_config() {
        let text = format!(
            "{MINIMAL}\n[flatten]\nk = 8\nC = 2\nmask = \"raw,nbr\"\nstandardize = true\nzero_tol = 1e-9\nlog_degree = false\n\
             [backend]\nkind = \"external\"\ncommand = \"run {{train_x}} {{out}}\"\ntimeout = 5\n\
             [eval]\nseeds = [3, 4]\nn_labeled = 50\nn_anomalies = 10\n"
        );
        let c = ExperimentConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(c.flatten.order, HopOrder::Fixed(2));
        assert_eq!(c.flatten.mask.to_string(), "raw,nbr");
        assert_eq!(c.flatten.embedding.zero_tol, 1e-9);
        match &c.backend {
            BackendConfig::External(e) => {
                assert_eq!(e.timeout, Duration::from_secs(5));
                assert_eq!(e.command, "run {train_x} {out}");
            }
            other => panic!("unexpected backend {other:?}"),
        }
        assert_eq!(c.eval.seeds, vec![3, 4]);

        let partial = format!("{MINIMAL}\n[flatten]\nC = 3\n");
        let c = ExperimentConfig::from_toml(&partial, Path::new(".")).unwrap();
        assert_eq!((c.flatten.order, c.flatten.embedding.k), (HopOrder::Fixed(3), 16));
    }

    #[test]
    fn rejects_invalid() {
        for extra in [
            "[flatten]\nC = \"seven\"\n",
            "[flatten]\nC = 0\n",
            "[flatten]\nmask = \"raw,edges\"\n",
            "[backend]\nkind = \"gpu\"\n",
            "[backend]\nkind = \"external\"\n",
            "[eval]\nbogus = 1\n",
        ] {
            let text = format!("{MINIMAL}\n{extra}");
            assert!(ExperimentConfig::from_toml(&text, Path::new(".")).is_err(), "{extra}");
        }
    }
}
