//! Synthetic attributed graphs with injected contextual and structural anomalies.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph, LabelVector};

/// A graph with its node features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
}

impl Dataset {
    pub fn new(graph: Graph, features: FeatureMatrix, labels: LabelVector) -> Result<Self> {
        let n = graph.node_count();
        for (what, found) in [("feature rows", features.nrows()), ("labels", labels.len())] {
            if found != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found,
                });
            }
        }
        Ok(Dataset {
            graph,
            features,
            labels,
        })
    }

    /// Reads edge list, feature CSV and label file; the feature row count
    /// fixes the node count.
    pub fn load(edges: &Path, features: &Path, labels: &Path) -> Result<Self> {
        let x = FeatureMatrix::load_csv_file(features)?;
        let g = Graph::load_edge_list_file(edges, x.nrows())?;
        let y = LabelVector::load_file(labels)?;
        Self::new(g, x, y)
    }

    /// Writes `edges.txt`, `features.csv` and `labels.txt` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| -> Result<BufWriter<File>> {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| Error::io(p, e))
        };
        let mut w = open("edges.txt")?;
        self.graph.write_edge_list(&mut w)?;
        w.flush()?;
        let mut w = open("features.csv")?;
        self.features.write_csv(&mut w)?;
        w.flush()?;
        let mut w = open("labels.txt")?;
        self.labels.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Preferential attachment: a seed clique on `m + 1` nodes, then each new
/// node links to `m` distinct existing nodes chosen proportionally to degree.
pub fn barabasi_albert(n: usize, m: usize, rng: &mut impl Rng) -> Result<Graph> {
    if m == 0 || n <= m {
        return Err(Error::InvalidArgument(format!(
            "preferential attachment needs n > m >= 1 (n={n}, m={m})"
        )));
    }
    let mut edges = Vec::new();
    // each node appears once per incident edge
    let mut endpoints = Vec::new();
    for u in 0..=m {
        for v in u + 1..=m {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((v, t));
            endpoints.extend([v, t]);
        }
    }
    Graph::from_edges(n, edges)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionConfig {
    pub n_contextual: usize,
    pub n_structural: usize,
    pub clique_size: usize,
    /// Candidates examined per contextual anomaly.
    pub candidate_pool: usize,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        InjectionConfig {
            n_contextual: 25,
            n_structural: 25,
            clique_size: 5,
            candidate_pool: 50,
            seed: 0,
        }
    }
}

/// Injects anomalies into a clean graph; every injected node is labeled 1.
///
/// Structural anomalies: `n_structural` nodes split into groups of
/// `clique_size`, each group wired into a clique. Contextual anomalies: a
/// disjoint set of `n_contextual` nodes, each taking the feature row, among
/// `candidate_pool` uniformly drawn other nodes, farthest from its own.
pub fn inject_synthetic_anomalies(
    g: &Graph,
    x: &FeatureMatrix,
    cfg: &InjectionConfig,
) -> Result<(Graph, FeatureMatrix, LabelVector)> {
    let n = g.node_count();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "feature rows",
            expected: n,
            found: x.nrows(),
        });
    }
    let infeasible = |msg: String| Err(Error::InvalidArgument(format!("infeasible injection: {msg}")));
    if cfg.n_contextual + cfg.n_structural > n {
        return infeasible(format!(
            "{} anomalies requested on {n} nodes",
            cfg.n_contextual + cfg.n_structural
        ));
    }
    if cfg.n_structural > 0 && (cfg.clique_size < 2 || !cfg.n_structural.is_multiple_of(cfg.clique_size)) {
        return infeasible(format!(
            "{} structural anomalies do not split into cliques of size {}",
            cfg.n_structural, cfg.clique_size
        ));
    }
    if cfg.n_contextual > 0 && (cfg.candidate_pool == 0 || cfg.candidate_pool > n - 1) {
        return infeasible(format!(
            "candidate pool {} must be in 1..={}",
            cfg.candidate_pool,
            n - 1
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chosen = sample(&mut rng, n, cfg.n_contextual + cfg.n_structural).into_vec();
    let (structural, contextual) = chosen.split_at(cfg.n_structural);
    let mut labels = vec![0u8; n];

    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    for clique in structural.chunks(cfg.clique_size) {
        for (i, &u) in clique.iter().enumerate() {
            labels[u] = 1;
            for &v in &clique[i + 1..] {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let original = x.view();
    let mut values = x.as_array().clone();
    for &v in contextual {
        labels[v] = 1;
        let own = original.row(v);
        let mut best = (f64::NEG_INFINITY, v);
        for i in sample(&mut rng, n - 1, cfg.candidate_pool) {
            let c = if i >= v { i + 1 } else { i };
            let d2: f64 = original
                .row(c)
                .iter()
                .zip(own.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            if d2 > best.0 {
                best = (d2, c);
            }
        }
        values.row_mut(v).assign(&original.row(best.1));
    }
    Ok((graph, FeatureMatrix::new(values)?, LabelVector::new(labels)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    /// Edges added per node by preferential attachment.
    pub attach: usize,
    /// Weight of the neighbourhood mean in the clean features; in `[0, 1)`.
    pub homophily: f64,
    pub injection: InjectionConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 1000,
            d: 8,
            attach: 3,
            homophily: 0.5,
            injection: InjectionConfig::default(),
        }
    }
}

/// Preferential-attachment graph with neighbourhood-smoothed Gaussian
/// features, then anomaly injection.
pub fn synthetic_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    if !(0.0..1.0).contains(&cfg.homophily) {
        return Err(Error::InvalidArgument("homophily must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.injection.seed ^ 0x9e37_79b9_7f4a_7c15);
    let g = barabasi_albert(cfg.n, cfg.attach, &mut rng)?;
    let noise = Array2::from_shape_simple_fn((cfg.n, cfg.d), || rng.sample::<f64, _>(StandardNormal));
    let mut clean = noise.clone();
    for v in 0..cfg.n {
        let nb = g.neighbors(v);
        if nb.is_empty() {
            continue;
        }
        for j in 0..cfg.d {
            let mean = nb.iter().map(|&u| noise[[u as usize, j]]).sum::<f64>() / nb.len() as f64;
            clean[[v, j]] = (1.0 - cfg.homophily) * noise[[v, j]] + cfg.homophily * mean;
        }
    }
    let (graph, features, labels) =
        inject_synthetic_anomalies(&g, &FeatureMatrix::new(clean)?, &cfg.injection)?;
    Dataset::new(graph, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (Graph, FeatureMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = barabasi_albert(60, 2, &mut rng).unwrap();
        let x = Array2::from_shape_fn((60, 3), |(i, j)| (i * 3 + j) as f64);
        (g, FeatureMatrix::new(x).unwrap())
    }

    #[test]
    fn preferential_attachment_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = barabasi_albert(200, 3, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 6 + 3 * (200 - 4));
        assert!(g.degree().iter().all(|&d| d >= 3));
        assert_eq!(g.connected_components().0, 1);
    }

    #[test]
    fn no_injection_is_identity() {
        let (g, x) = small();
        let cfg = InjectionConfig {
            n_contextual: 0,
            n_structural: 0,
            ..Default::default()
        };
        let (g2, x2, y) = inject_synthetic_anomalies(&g, &x, &cfg).unwrap();
        assert_eq!(g2, g);
        assert_eq!(x2, x);
        assert_eq!(y.count_positive(), 0);
    }

    #[test]
    fn clique_nodes_gain_degree() {
        let (g, x) = small();
        let cfg = InjectionConfig {
            n_contextual: 0,
            n_structural: 5,
            clique_size: 5,
            ..Default::default()
        };
        let (g2, _, y) = inject_synthetic_anomalies(&g, &x, &cfg).unwrap();
        let members: Vec<usize> = (0..60).filter(|&v| y.as_slice()[v] == 1).collect();
        assert_eq!(members.len(), 5);
        for &u in &members {
            assert!(g2.degree()[u] >= 4);
            for &v in &members {
                if u != v {
                    assert!(g2.has_edge(u, v));
                }
            }
        }
    }

    #[test]
    fn contextual_rows_copied_from_other_nodes() {
        let (g, x) = small();
        let cfg = InjectionConfig {
            n_contextual: 6,
            n_structural: 0,
            candidate_pool: 10,
            ..Default::default()
        };
        let (g2, x2, y) = inject_synthetic_anomalies(&g, &x, &cfg).unwrap();
        assert_eq!(g2, g);
        for v in 0..60 {
            if y.as_slice()[v] == 1 {
                assert_ne!(x2.view().row(v), x.view().row(v));
                let src = (0..60).find(|&u| x.view().row(u) == x2.view().row(v));
                assert!(src.is_some_and(|u| u != v));
            } else {
                assert_eq!(x2.view().row(v), x.view().row(v));
            }
        }
    }

    #[test]
    fn infeasible_counts() {
        let (g, x) = small();
        let too_many = InjectionConfig {
            n_contextual: 40,
            n_structural: 25,
            ..Default::default()
        };
        assert!(inject_synthetic_anomalies(&g, &x, &too_many).is_err());
        let ragged = InjectionConfig {
            n_structural: 7,
            ..Default::default()
        };
        assert!(inject_synthetic_anomalies(&g, &x, &ragged).is_err());
        let big_pool = InjectionConfig {
            candidate_pool: 60,
            ..Default::default()
        };
        assert!(inject_synthetic_anomalies(&g, &x, &big_pool).is_err());
    }

    #[test]
    fn default_dataset() {
        let ds = synthetic_dataset(&SynthConfig::default()).unwrap();
        assert_eq!(ds.graph.node_count(), 1000);
        assert_eq!(ds.labels.count_positive(), 50);
        assert_eq!(ds, synthetic_dataset(&SynthConfig::default()).unwrap());
    }
}
