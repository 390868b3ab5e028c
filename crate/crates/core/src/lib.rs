//! Flattens attributed graphs into plain feature tables — raw attributes,
//! Laplacian positional embeddings, degree and PageRank, Beta-wavelet
//! neighbourhood summaries — and scores nodes for anomalies with an
//! in-context tabular backend.

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod error;
pub mod eval;
pub mod graph;
pub mod spectral;
pub mod structure;
pub mod table;
pub mod wavelet;

pub use backend::{ExternalBackend, InContextBackend, InContextTask, KnnBackend, ScoreVector};
pub use error::{Error, Result};
pub use eval::experiment::{flatten, run_ablation, run_experiment, EvalConfig, FlattenConfig, HopOrder};
pub use eval::metrics::{auprc, auroc};
pub use eval::report::EvalReport;
pub use eval::split::{generate_split, SplitSpec};
pub use eval::synth::{inject_synthetic_anomalies, synthetic_dataset, Dataset, SynthConfig};
pub use graph::{FeatureMatrix, Graph, LabelVector};
pub use spectral::{laplacian_embeddings, LaplacianOperator, SpectralEmbedding};
pub use structure::{pagerank, structural_characteristics, StructuralCharacteristics};
pub use table::{AugmentedTable, FeatureGroups};
pub use wavelet::{apply_wavelet, wavelet_bank, WaveletBankOutput};
