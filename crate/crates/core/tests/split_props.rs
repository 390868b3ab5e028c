use proptest::prelude::*;

use flatgad::eval::split::generate_split;
use flatgad::graph::LabelVector;

fn labels(n_pos: usize, n_neg: usize) -> LabelVector {
    // interleave so anomaly ids are not a prefix
    let mut y = Vec::with_capacity(n_pos + n_neg);
    let (mut p, mut q) = (0, 0);
    while p < n_pos || q < n_neg {
        if p < n_pos && (q >= n_neg || (p + q) % 3 == 1) {
            y.push(1);
            p += 1;
        } else {
            y.push(0);
            q += 1;
        }
    }
    LabelVector::new(y).unwrap()
}

/// Each anomaly's inclusion count over 10,000 seeds is binomial with
/// p = quota / #anomalies; all must lie within 3 sigma of the mean.
#[test]
fn anomaly_marginals_over_10000_seeds() {
    let y = labels(12, 48);
    let (n_labeled, n_anomalies, seeds) = (20, 4, 10_000u64);
    let mut count = vec![0u32; y.len()];
    for seed in 0..seeds {
        let s = generate_split(&y, n_labeled, n_anomalies, seed).unwrap();
        for &v in &s.labeled_ids {
            count[v] += 1;
        }
    }
    let p = n_anomalies as f64 / 12.0;
    let mean = seeds as f64 * p;
    let sigma = (seeds as f64 * p * (1.0 - p)).sqrt();
    for (v, &c) in count.iter().enumerate() {
        if y.as_slice()[v] == 1 {
            let z = (c as f64 - mean) / sigma;
            assert!(z.abs() <= 3.0, "anomaly {v}: {c} inclusions, z = {z:.2}");
        }
    }
    // the remaining budget always goes to normals
    let total: u32 = (0..y.len()).filter(|&v| y.as_slice()[v] == 0).map(|v| count[v]).sum();
    assert_eq!(total as u64, 16 * seeds);
}

proptest! {
    #[test]
    fn split_shape(n_pos in 2usize..30, n_neg in 2usize..60, quota in 1usize..5, extra in 0usize..20, seed in any::<u64>()) {
        let y = labels(n_pos, n_neg);
        let quota = quota.min(n_pos);
        let n_labeled = (quota + extra).min(quota + n_neg);
        let s = generate_split(&y, n_labeled, quota, seed).unwrap();
        prop_assert_eq!(s.labeled_ids.len(), n_labeled);
        prop_assert_eq!(s.labeled_anomalies(), quota);
        prop_assert_eq!(s.labeled_ids.len() + s.test_ids.len(), y.len());
        let mut all: Vec<usize> = s.labeled_ids.iter().chain(&s.test_ids).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        for (&v, &l) in s.labeled_ids.iter().zip(&s.labeled_y) {
            prop_assert_eq!(y.as_slice()[v], l);
        }
        prop_assert_eq!(&s, &generate_split(&y, n_labeled, quota, seed).unwrap());
    }
}
