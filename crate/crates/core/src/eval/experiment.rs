//! Experiment driver: flatten once, then split, select hop order, score and
//! measure per seed.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::backend::{InContextBackend, InContextTask, KnnBackend};
use crate::error::{Error, Result};
use crate::eval::metrics::{auprc, auroc};
use crate::eval::report::{EvalReport, SeedResult, SeedStatus};
use crate::eval::split::{generate_split, SplitSpec};
use crate::eval::synth::Dataset;
use crate::graph::{FeatureMatrix, Graph};
use crate::spectral::{laplacian_embeddings_with, EmbeddingOptions, SpectralEmbedding};
use crate::structure::{structural_characteristics_with, PageRankConfig, StructuralCharacteristics};
use crate::table::{AugmentedTable, FeatureGroups, TableInputs};
use crate::wavelet::{wavelet_bank, WaveletBankOutput};

/// Candidate filter-bank orders for automatic selection.
pub const ORDER_CANDIDATES: [usize; 3] = [1, 2, 3];
pub const DEFAULT_CV_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopOrder {
    /// Chosen per split from [`ORDER_CANDIDATES`] by cross-validated AUPRC on the labeled nodes.
    Auto,
    Fixed(usize),
}

impl std::fmt::Display for HopOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HopOrder::Auto => f.write_str("auto"),
            HopOrder::Fixed(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlattenConfig {
    pub embedding: EmbeddingOptions,
    pub order: HopOrder,
    pub mask: FeatureGroups,
    pub standardize: bool,
    pub pagerank: PageRankConfig,
    pub log_degree: bool,
}

impl Default for FlattenConfig {
    fn default() -> Self {
        FlattenConfig {
            embedding: EmbeddingOptions::new(16),
            order: HopOrder::Auto,
            mask: FeatureGroups::ALL,
            standardize: false,
            pagerank: PageRankConfig::default(),
            log_degree: false,
        }
    }
}

impl FlattenConfig {
    fn orders(&self) -> Vec<usize> {
        match self.order {
            HopOrder::Fixed(c) => vec![c],
            HopOrder::Auto => ORDER_CANDIDATES.to_vec(),
        }
    }
}

/// Every feature block a set of experiments may need, computed once per dataset.
#[derive(Debug, Clone)]
pub struct FeatureBlocks {
    pub raw: FeatureMatrix,
    pub lap: Option<SpectralEmbedding>,
    pub char: Option<StructuralCharacteristics>,
    pub nbr: BTreeMap<usize, WaveletBankOutput>,
}

impl FeatureBlocks {
    /// Computes the blocks selected by `needed` for every order in `orders`.
    pub fn compute(
        g: &Graph,
        x: &FeatureMatrix,
        cfg: &FlattenConfig,
        needed: FeatureGroups,
        orders: &[usize],
    ) -> Result<Self> {
        let lap = needed
            .lap
            .then(|| laplacian_embeddings_with(g, &cfg.embedding))
            .transpose()?;
        let char = needed
            .char
            .then(|| structural_characteristics_with(g, &cfg.pagerank, cfg.log_degree))
            .transpose()?;
        let mut nbr = BTreeMap::new();
        if needed.nbr {
            for &c in orders {
                nbr.insert(c, wavelet_bank(g, x, c)?);
            }
        }
        Ok(FeatureBlocks {
            raw: x.clone(),
            lap,
            char,
            nbr,
        })
    }

    pub fn table(&self, mask: FeatureGroups, order: usize, standardize: bool) -> Result<AugmentedTable> {
        let inputs = TableInputs {
            raw: Some(&self.raw),
            lap: self.lap.as_ref(),
            char: self.char.as_ref(),
            nbr: self.nbr.get(&order),
        };
        Ok(AugmentedTable::assemble(&inputs, mask)?.standardize(standardize))
    }
}

/// Flattens a graph into its augmented table for a fixed filter-bank order.
pub fn flatten(g: &Graph, x: &FeatureMatrix, cfg: &FlattenConfig, order: usize) -> Result<AugmentedTable> {
    FeatureBlocks::compute(g, x, cfg, cfg.mask, &[order])?.table(cfg.mask, order, cfg.standardize)
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub seeds: Vec<u64>,
    pub n_labeled: usize,
    pub n_anomalies: usize,
    pub cv_folds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seeds: (0..10).collect(),
            n_labeled: 100,
            n_anomalies: 20,
            cv_folds: DEFAULT_CV_FOLDS,
        }
    }
}

/// Stratified fold assignment of the labeled set, shuffled by `seed`.
fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f3c_a1d2_e4b6_7089);
    let mut assignment = vec![0; y.len()];
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (r, i) in idx.into_iter().enumerate() {
            assignment[i] = r % folds;
        }
    }
    assignment
}

/// Mean held-out AUPRC of `backend` over stratified folds of the labeled rows.
pub fn cross_validated_auprc(
    table: &AugmentedTable,
    split: &SplitSpec,
    backend: &dyn InContextBackend,
    folds: usize,
) -> Result<f64> {
    let y = &split.labeled_y;
    let pos = y.iter().filter(|&&v| v == 1).count();
    let folds = folds.min(pos).min(y.len() - pos);
    if folds < 2 {
        return Err(Error::InvalidArgument(
            "cross-validation needs at least two examples of each class".into(),
        ));
    }
    let assignment = stratified_folds(y, folds, split.seed);
    let mut total = 0.0;
    for f in 0..folds {
        let (mut tr, mut tr_y, mut te, mut te_y) = (vec![], vec![], vec![], vec![]);
        for (i, &node) in split.labeled_ids.iter().enumerate() {
            if assignment[i] == f {
                te.push(node);
                te_y.push(y[i]);
            } else {
                tr.push(node);
                tr_y.push(y[i]);
            }
        }
        let task = InContextTask::from_table(table, &tr, &tr_y, &te)?;
        let scores = backend.predict(&task)?;
        total += auprc(scores.as_slice(), &te_y)?;
    }
    Ok(total / folds as f64)
}

/// Picks the order with the best cross-validated AUPRC; ties go to the smaller order.
pub fn select_order(
    tables: &BTreeMap<usize, AugmentedTable>,
    split: &SplitSpec,
    backend: &dyn InContextBackend,
    folds: usize,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&c, table) in tables {
        let score = cross_validated_auprc(table, split, backend, folds)?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((c, score));
        }
    }
    best.map(|(c, _)| c)
        .ok_or_else(|| Error::InvalidArgument("no candidate orders".into()))
}

fn score_split(
    tables: &BTreeMap<usize, AugmentedTable>,
    labels: &[u8],
    split: &SplitSpec,
    backend: &dyn InContextBackend,
    folds: usize,
) -> Result<SeedResult> {
    let t0 = Instant::now();
    let order = if tables.len() > 1 {
        select_order(tables, split, backend, folds)?
    } else {
        *tables.keys().next().expect("at least one table")
    };
    let select_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let task = InContextTask::from_table(&tables[&order], &split.labeled_ids, &split.labeled_y, &split.test_ids)?;
    let scores = backend.predict(&task)?;
    let score_secs = t1.elapsed().as_secs_f64();

    let test_y: Vec<u8> = split.test_ids.iter().map(|&v| labels[v]).collect();
    Ok(SeedResult {
        seed: split.seed,
        status: SeedStatus::Ok,
        order: Some(order),
        auroc: Some(auroc(scores.as_slice(), &test_y)?),
        auprc: Some(auprc(scores.as_slice(), &test_y)?),
        select_secs,
        score_secs,
    })
}

/// Runs every split against precomputed feature blocks.
pub fn run_with_blocks(
    blocks: &FeatureBlocks,
    labels: &[u8],
    splits: &[SplitSpec],
    flatten: &FlattenConfig,
    eval: &EvalConfig,
    backend: &dyn InContextBackend,
) -> Result<EvalReport> {
    let mask = flatten.mask;
    let orders = if mask.nbr { flatten.orders() } else { vec![0] };
    let mut tables = BTreeMap::new();
    for c in orders {
        tables.insert(c, blocks.table(mask, c, flatten.standardize)?);
    }
    let run = |split: &SplitSpec| {
        score_split(&tables, labels, split, backend, eval.cv_folds).unwrap_or_else(|e| SeedResult {
            seed: split.seed,
            status: SeedStatus::Failed(e.to_string()),
            order: None,
            auroc: None,
            auprc: None,
            select_secs: 0.0,
            score_secs: 0.0,
        })
    };
    // seeds are independent; the shared tables are read-only
    let seeds: Vec<SeedResult> = if backend.parallel_tasks() {
        splits.par_iter().map(run).collect()
    } else {
        splits.iter().map(run).collect()
    };
    Ok(EvalReport::new(
        flatten,
        backend.name(),
        seeds,
        tables.values().next().map_or(0, |t| t.ncols()),
    ))
}

/// Generated splits for every configured seed.
pub fn splits_for(ds: &Dataset, eval: &EvalConfig) -> Result<Vec<SplitSpec>> {
    eval.seeds
        .iter()
        .map(|&s| generate_split(&ds.labels, eval.n_labeled, eval.n_anomalies, s))
        .collect()
}

/// Full pipeline on one dataset: flatten, then score each split.
pub fn run_experiment(
    ds: &Dataset,
    splits: &[SplitSpec],
    flatten: &FlattenConfig,
    eval: &EvalConfig,
    backend: &dyn InContextBackend,
) -> Result<EvalReport> {
    let t = Instant::now();
    let blocks = FeatureBlocks::compute(&ds.graph, &ds.features, flatten, flatten.mask, &flatten.orders())?;
    let flatten_secs = t.elapsed().as_secs_f64();
    let mut report = run_with_blocks(&blocks, ds.labels.as_slice(), splits, flatten, eval, backend)?;
    report.flatten_secs = flatten_secs;
    Ok(report)
}

/// One report per mask in the cumulative ablation ladder, sharing feature blocks.
pub fn run_ablation(
    ds: &Dataset,
    splits: &[SplitSpec],
    flatten: &FlattenConfig,
    eval: &EvalConfig,
    backend: &dyn InContextBackend,
) -> Result<Vec<EvalReport>> {
    let t = Instant::now();
    let blocks = FeatureBlocks::compute(&ds.graph, &ds.features, flatten, FeatureGroups::ALL, &flatten.orders())?;
    let flatten_secs = t.elapsed().as_secs_f64();
    FeatureGroups::ablation_ladder()
        .into_iter()
        .map(|mask| {
            let cfg = FlattenConfig {
                mask,
                ..flatten.clone()
            };
            let mut r = run_with_blocks(&blocks, ds.labels.as_slice(), splits, &cfg, eval, backend)?;
            r.flatten_secs = flatten_secs;
            Ok(r)
        })
        .collect()
}

/// Convenience: synthetic-style run with the reference backend.
pub fn run_knn_experiment(ds: &Dataset, flatten: &FlattenConfig, eval: &EvalConfig) -> Result<EvalReport> {
    let splits = splits_for(ds, eval)?;
    run_experiment(ds, &splits, flatten, eval, &KnnBackend::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i % 5 == 0)).collect();
        let a = stratified_folds(&y, 5, 9);
        for f in 0..5 {
            let members: Vec<usize> = (0..100).filter(|&i| a[i] == f).collect();
            assert_eq!(members.len(), 20);
            assert_eq!(members.iter().filter(|&&i| y[i] == 1).count(), 4);
        }
        assert_eq!(a, stratified_folds(&y, 5, 9));
    }

    #[test]
    fn order_display() {
        assert_eq!(HopOrder::Auto.to_string(), "auto");
        assert_eq!(HopOrder::Fixed(2).to_string(), "2");
    }
}
