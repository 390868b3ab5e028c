use proptest::prelude::*;

use flatgad::graph::Graph;

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..40).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..120)))
}

proptest! {
    #[test]
    fn ones_give_degrees((n, edges) in graph_strategy()) {
        let g = Graph::from_edges(n, edges).unwrap();
        let y = g.adjacency_matvec(&vec![1.0; n]).unwrap();
        let deg: Vec<f64> = g.degree().iter().map(|&d| d as f64).collect();
        prop_assert_eq!(y, deg);
    }

    #[test]
    fn adjacency_is_symmetric(
        (n, edges) in graph_strategy(),
        seed in prop::collection::vec(-1.0f64..1.0, 80),
    ) {
        let g = Graph::from_edges(n, edges).unwrap();
        let (x, y) = (&seed[..n], &seed[40..40 + n]);
        let ax = g.adjacency_matvec(x).unwrap();
        let ay = g.adjacency_matvec(y).unwrap();
        let yax: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let xay: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        let scale = yax.abs().max(xay.abs()).max(1e-300);
        prop_assert!((yax - xay).abs() <= 1e-10 * scale, "{} vs {}", yax, xay);
    }

    #[test]
    fn edge_list_round_trip((n, edges) in graph_strategy()) {
        let g = Graph::from_edges(n, edges).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Graph::load_edge_list(buf.as_slice(), n).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn csr_is_simple_and_sorted((n, edges) in graph_strategy()) {
        let g = Graph::from_edges(n, edges).unwrap();
        for v in 0..n {
            let row = g.neighbors(v);
            prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(!row.contains(&(v as u32)));
            for &u in row {
                prop_assert!(g.has_edge(u as usize, v));
            }
        }
    }
}
