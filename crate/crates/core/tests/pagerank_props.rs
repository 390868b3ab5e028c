use proptest::prelude::*;

use flatgad::graph::Graph;
use flatgad::structure::{pagerank, structural_characteristics, PageRankConfig};

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..60).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..150)))
}

proptest! {
    #[test]
    fn distribution((n, edges) in graph_strategy(), damping in 0.05f64..0.95) {
        let g = Graph::from_edges(n, edges).unwrap();
        // the error contracts by `damping` per step
        let cfg = PageRankConfig { damping, tol: 1e-10, max_iter: 5000 };
        let pr = pagerank(&g, &cfg).unwrap();
        prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
        prop_assert!(pr.iter().all(|&p| p > 0.0));
    }

    /// Relabelling nodes permutes the scores.
    #[test]
    fn equivariant(
        (n, edges) in graph_strategy(),
        perm_seed in prop::collection::vec(any::<u32>(), 60),
    ) {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| (perm_seed[i], i));
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        let h = Graph::from_edges(n, edges.iter().map(|&(u, v)| (perm[u], perm[v]))).unwrap();
        let cfg = PageRankConfig::default();
        let (a, b) = (pagerank(&g, &cfg).unwrap(), pagerank(&h, &cfg).unwrap());
        for v in 0..n {
            prop_assert!((a[v] - b[perm[v]]).abs() <= 1e-9);
        }
    }

    #[test]
    fn degree_column_is_adjacency_of_ones((n, edges) in graph_strategy()) {
        let g = Graph::from_edges(n, edges).unwrap();
        let s = structural_characteristics(&g).unwrap();
        prop_assert_eq!(s.degree, g.adjacency_matvec(&vec![1.0; n]).unwrap());
    }
}
