//! Label-scarce splits: a small labeled context set with a fixed anomaly
//! quota, every other node held out for evaluation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::LabelVector;

pub const DEFAULT_N_LABELED: usize = 100;
pub const DEFAULT_N_ANOMALIES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    /// Ascending node ids.
    pub labeled_ids: Vec<usize>,
    pub labeled_y: Vec<u8>,
    /// Ascending node ids, the complement of `labeled_ids`.
    pub test_ids: Vec<usize>,
    pub seed: u64,
}

impl SplitSpec {
    /// Builds a split from an explicit labeled id set.
    pub fn from_labeled(labels: &LabelVector, mut labeled_ids: Vec<usize>, seed: u64) -> Result<Self> {
        let n = labels.len();
        labeled_ids.sort_unstable();
        if let Some(&bad) = labeled_ids.iter().find(|&&v| v >= n) {
            return Err(Error::InvalidArgument(format!(
                "labeled node {bad} out of range for {n} nodes"
            )));
        }
        if labeled_ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("labeled ids contain duplicates".into()));
        }
        let y = labels.as_slice();
        let labeled_y = labeled_ids.iter().map(|&v| y[v]).collect();
        let in_labeled: HashSet<usize> = labeled_ids.iter().copied().collect();
        let test_ids = (0..n).filter(|v| !in_labeled.contains(v)).collect();
        Ok(SplitSpec {
            labeled_ids,
            labeled_y,
            test_ids,
            seed,
        })
    }

    pub fn labeled_anomalies(&self) -> usize {
        self.labeled_y.iter().filter(|&&y| y == 1).count()
    }
}

/// Samples `n_anomalies` anomalous and `n_labeled - n_anomalies` normal nodes
/// uniformly without replacement from a ChaCha8 stream seeded with `seed`.
pub fn generate_split(
    labels: &LabelVector,
    n_labeled: usize,
    n_anomalies: usize,
    seed: u64,
) -> Result<SplitSpec> {
    if n_anomalies > n_labeled {
        return Err(Error::InvalidArgument(format!(
            "anomaly quota {n_anomalies} exceeds labeled budget {n_labeled}"
        )));
    }
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&v| labels.as_slice()[v] == 1);
    let n_normal = n_labeled - n_anomalies;
    if pos.len() < n_anomalies {
        return Err(Error::InsufficientClass {
            class: "anomalous",
            needed: n_anomalies,
            available: pos.len(),
        });
    }
    if neg.len() < n_normal {
        return Err(Error::InsufficientClass {
            class: "normal",
            needed: n_normal,
            available: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, pos.len(), n_anomalies)
        .into_iter()
        .map(|i| pos[i])
        .collect();
    chosen.extend(sample(&mut rng, neg.len(), n_normal).into_iter().map(|i| neg[i]));
    SplitSpec::from_labeled(labels, chosen, seed)
}

/// Reads fixed splits: one split per non-comment line, labeled node ids
/// separated by whitespace or commas. The split's seed is its line ordinal.
pub fn load_splits<R: BufRead>(reader: R, labels: &LabelVector) -> Result<Vec<SplitSpec>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let ids = t
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(i + 1, format!("invalid node id {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let seed = out.len() as u64;
        out.push(SplitSpec::from_labeled(labels, ids, seed).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn load_splits_file(path: impl AsRef<Path>, labels: &LabelVector) -> Result<Vec<SplitSpec>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    load_splits(BufReader::new(f), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, anomalies: &[usize]) -> LabelVector {
        let mut y = vec![0u8; n];
        for &a in anomalies {
            y[a] = 1;
        }
        LabelVector::new(y).unwrap()
    }

    #[test]
    fn quota_and_partition() {
        let anomalies: Vec<usize> = (0..300).step_by(7).collect();
        let y = labels(300, &anomalies);
        let s = generate_split(&y, DEFAULT_N_LABELED, DEFAULT_N_ANOMALIES, 3).unwrap();
        assert_eq!(s.labeled_ids.len(), 100);
        assert_eq!(s.labeled_anomalies(), 20);
        assert_eq!(s.test_ids.len(), 200);
        let mut all: Vec<usize> = s.labeled_ids.iter().chain(&s.test_ids).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn forced_selection_of_all_anomalies() {
        let anomalies: Vec<usize> = (0..20).map(|i| i * 9).collect();
        let y = labels(400, &anomalies);
        let s = generate_split(&y, 100, 20, 11).unwrap();
        for a in anomalies {
            assert!(s.labeled_ids.contains(&a));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let y = labels(200, &(0..40).collect::<Vec<_>>());
        assert_eq!(
            generate_split(&y, 50, 10, 5).unwrap(),
            generate_split(&y, 50, 10, 5).unwrap()
        );
        assert_ne!(
            generate_split(&y, 50, 10, 5).unwrap().labeled_ids,
            generate_split(&y, 50, 10, 6).unwrap().labeled_ids
        );
    }

    #[test]
    fn insufficient_classes() {
        let y = labels(50, &[1, 2, 3]);
        assert!(matches!(
            generate_split(&y, 20, 5, 0),
            Err(Error::InsufficientClass { class: "anomalous", .. })
        ));
        assert!(matches!(
            generate_split(&y, 60, 3, 0),
            Err(Error::InsufficientClass { class: "normal", .. })
        ));
        assert!(generate_split(&y, 2, 3, 0).is_err());
    }

    #[test]
    fn split_file() {
        let y = labels(6, &[1, 4]);
        let text = "# two splits\n0 1 2\n4,5, 3\n";
        let splits = load_splits(text.as_bytes(), &y).unwrap();
        assert_eq!(splits.len(), 2);
        assert_eq!(splits[0].labeled_y, vec![0, 1, 0]);
        assert_eq!(splits[1].labeled_ids, vec![3, 4, 5]);
        assert_eq!(splits[1].test_ids, vec![0, 1, 2]);
        assert_eq!(splits[1].seed, 1);
        assert!(load_splits("0 9\n".as_bytes(), &y).is_err());
        assert!(load_splits("0 0\n".as_bytes(), &y).is_err());
    }
}
