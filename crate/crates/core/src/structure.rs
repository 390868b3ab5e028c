//! Explicit structural characteristics: node degree and PageRank.

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    /// Stop once the L1 change between iterates is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Power iteration on the random walk `A D^{-1}` with uniform teleportation.
///
/// Degree-0 nodes spread their mass uniformly over all nodes. The returned
/// vector sums to one.
pub fn pagerank(g: &Graph, cfg: &PageRankConfig) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidArgument("pagerank needs at least one node".into()));
    }
    if !(cfg.damping > 0.0 && cfg.damping < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "damping {} outside (0, 1)",
            cfg.damping
        )));
    }
    let nf = n as f64;
    let deg = g.degree();
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut share = vec![0.0; n];
    let mut change = f64::INFINITY;

    for _ in 0..cfg.max_iter {
        let mut dangling = 0.0;
        for v in 0..n {
            if deg[v] == 0 {
                dangling += rank[v];
                share[v] = 0.0;
            } else {
                share[v] = rank[v] / deg[v] as f64;
            }
        }
        let base = (1.0 - cfg.damping) / nf + cfg.damping * dangling / nf;
        for (v, out) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &u in g.neighbors(v) {
                acc += share[u as usize];
            }
            *out = base + cfg.damping * acc;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        change = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if change <= cfg.tol {
            return Ok(rank);
        }
    }
    Err(Error::PageRankNoConvergence {
        iterations: cfg.max_iter,
        residual: change,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralCharacteristics {
    pub degree: Vec<f64>,
    pub pagerank: Vec<f64>,
}

impl StructuralCharacteristics {
    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }
}

/// Degree and default-parameter PageRank.
pub fn structural_characteristics(g: &Graph) -> Result<StructuralCharacteristics> {
    structural_characteristics_with(g, &PageRankConfig::default(), false)
}

/// As [`structural_characteristics`], optionally replacing degree by `ln(1 + deg)`.
pub fn structural_characteristics_with(
    g: &Graph,
    cfg: &PageRankConfig,
    log_degree: bool,
) -> Result<StructuralCharacteristics> {
    let degree = g
        .degree()
        .iter()
        .map(|&d| if log_degree { (d as f64).ln_1p() } else { d as f64 })
        .collect();
    Ok(StructuralCharacteristics {
        degree,
        pagerank: pagerank(g, cfg)?,
    })
}
