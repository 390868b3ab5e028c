//! In-context scoring backends.
//!
//! A backend receives labeled context rows and unlabeled query rows and
//! returns one anomaly probability per query. Nothing is trained or kept
//! between calls.
//!
//! External backends are driven over a file protocol. The command template
//! may reference `{train_x}`, `{train_y}`, `{test_x}` and `{out}`; the tables
//! are written in the [`AugmentedTable`] file format, `train_y` holds one
//! `0`/`1` per line, and the process must write exactly one probability per
//! query row to `{out}` and exit with status 0.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::table::{AugmentedTable, ColumnGroup, GroupTag};

#[derive(Debug, Clone, PartialEq)]
pub struct InContextTask {
    train: AugmentedTable,
    train_y: Vec<u8>,
    test: AugmentedTable,
}

impl InContextTask {
    /// Requires matching widths, at least two context rows and both classes.
    pub fn new(train: AugmentedTable, train_y: Vec<u8>, test: AugmentedTable) -> Result<Self> {
        if train.ncols() != test.ncols() || train.groups() != test.groups() {
            return Err(Error::DimensionMismatch {
                what: "query table width",
                expected: train.ncols(),
                found: test.ncols(),
            });
        }
        if train_y.len() != train.nrows() {
            return Err(Error::DimensionMismatch {
                what: "context labels",
                expected: train.nrows(),
                found: train_y.len(),
            });
        }
        if train_y.iter().any(|&y| y > 1) {
            return Err(Error::InvalidArgument("context labels must be 0 or 1".into()));
        }
        if train_y.len() < 2 || !train_y.contains(&0) || !train_y.contains(&1) {
            return Err(Error::SingleClass);
        }
        Ok(InContextTask {
            train,
            train_y,
            test,
        })
    }

    /// Builds a task from bare matrices, labelling every column as raw.
    pub fn from_matrices(train_x: Array2<f64>, train_y: Vec<u8>, test_x: Array2<f64>) -> Result<Self> {
        let groups = |w: usize| {
            if w == 0 {
                vec![]
            } else {
                vec![ColumnGroup {
                    tag: GroupTag::Raw,
                    span: 0..w,
                }]
            }
        };
        let train = AugmentedTable::new(train_x.clone(), groups(train_x.ncols()))?;
        let test = AugmentedTable::new(test_x.clone(), groups(test_x.ncols()))?;
        Self::new(train, train_y, test)
    }

    /// Context rows `labeled` and query rows `queries` of a full node table.
    pub fn from_table(
        table: &AugmentedTable,
        labeled: &[usize],
        labels: &[u8],
        queries: &[usize],
    ) -> Result<Self> {
        Self::new(table.select_rows(labeled), labels.to_vec(), table.select_rows(queries))
    }

    pub fn train(&self) -> &AugmentedTable {
        &self.train
    }

    pub fn train_y(&self) -> &[u8] {
        &self.train_y
    }

    pub fn test(&self) -> &AugmentedTable {
        &self.test
    }

    pub fn context_len(&self) -> usize {
        self.train.nrows()
    }

    pub fn query_len(&self) -> usize {
        self.test.nrows()
    }

    fn query_chunk(&self, rows: std::ops::Range<usize>) -> InContextTask {
        let idx: Vec<usize> = rows.collect();
        InContextTask {
            train: self.train.clone(),
            train_y: self.train_y.clone(),
            test: self.test.select_rows(&idx),
        }
    }
}

/// Anomaly probabilities, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some((i, x)) = scores
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            return Err(Error::InvalidArgument(format!(
                "score {x} at position {i} outside [0, 1]"
            )));
        }
        Ok(ScoreVector(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub trait InContextBackend: Send + Sync {
    fn name(&self) -> String;

    fn predict(&self, task: &InContextTask) -> Result<ScoreVector>;

    /// Whether independent tasks may be scored concurrently.
    fn parallel_tasks(&self) -> bool {
        true
    }
}

pub const DEFAULT_K_NEIGHBORS: usize = 5;
const KNN_EPS: f64 = 1e-12;

/// Distance-weighted k-nearest-neighbour vote over z-scored columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnBackend {
    pub k_neighbors: usize,
}

impl Default for KnnBackend {
    fn default() -> Self {
        KnnBackend {
            k_neighbors: DEFAULT_K_NEIGHBORS,
        }
    }
}

impl InContextBackend for KnnBackend {
    fn name(&self) -> String {
        format!("knn(k={})", self.k_neighbors)
    }

    fn predict(&self, task: &InContextTask) -> Result<ScoreVector> {
        predict_knn(task, self.k_neighbors)
    }
}

pub fn predict_knn(task: &InContextTask, k_neighbors: usize) -> Result<ScoreVector> {
    knn_scores(
        task.train.values(),
        &task.train_y,
        task.test.values(),
        k_neighbors,
    )
    .map(ScoreVector)
}

/// The kNN scoring kernel without the two-class requirement of [`InContextTask`].
///
/// Columns are centred and scaled with statistics from `train_x` only
/// (columns with standard deviation below 1e-12 are only centred). Each query
/// scores `sum w_i y_i / sum w_i` over its `k` nearest context rows with
/// `w_i = 1 / (1e-12 + dist_i)`. A query at distance exactly zero from some
/// context rows takes the mean label of those rows instead. Distance ties are
/// broken by context row order.
pub fn knn_scores(
    train_x: ArrayView2<'_, f64>,
    train_y: &[u8],
    test_x: ArrayView2<'_, f64>,
    k_neighbors: usize,
) -> Result<Vec<f64>> {
    let m = train_x.nrows();
    if train_y.len() != m {
        return Err(Error::DimensionMismatch {
            what: "context labels",
            expected: m,
            found: train_y.len(),
        });
    }
    if train_x.ncols() != test_x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "query table width",
            expected: train_x.ncols(),
            found: test_x.ncols(),
        });
    }
    if k_neighbors == 0 || k_neighbors > m {
        return Err(Error::InvalidArgument(format!(
            "k_neighbors = {k_neighbors} must be in 1..={m}"
        )));
    }
    let mf = m as f64;
    let (mean, scale): (Vec<f64>, Vec<f64>) = train_x
        .columns()
        .into_iter()
        .map(|c| {
            let mu = c.sum() / mf;
            let sd = (c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / mf).sqrt();
            (mu, if sd < 1e-12 { 1.0 } else { sd })
        })
        .unzip();
    let zscore = |row: ArrayView1<'_, f64>| -> Vec<f64> {
        row.iter()
            .zip(mean.iter().zip(&scale))
            .map(|(x, (mu, sd))| (x - mu) / sd)
            .collect()
    };
    let context: Vec<Vec<f64>> = train_x.rows().into_iter().map(zscore).collect();
    let queries: Vec<ArrayView1<'_, f64>> = test_x.rows().into_iter().collect();

    let scores = queries
        .into_par_iter()
        .map(|row| {
            let q = zscore(row);
            let mut dist: Vec<(f64, usize)> = context
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let d2: f64 = c.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
                    (d2.sqrt(), i)
                })
                .collect();
            let exact: Vec<u8> = dist
                .iter()
                .filter(|(d, _)| *d == 0.0)
                .map(|&(_, i)| train_y[i])
                .collect();
            if !exact.is_empty() {
                return exact.iter().map(|&y| y as f64).sum::<f64>() / exact.len() as f64;
            }
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (mut num, mut den) = (0.0, 0.0);
            for &(d, i) in &dist[..k_neighbors] {
                let w = 1.0 / (KNN_EPS + d);
                num += w * train_y[i] as f64;
                den += w;
            }
            num / den
        })
        .collect();
    Ok(scores)
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);
pub const DEFAULT_MAX_QUERY_ROWS: usize = 10_000;

/// Scores by running an external program per query chunk.
#[derive(Debug, Clone)]
pub struct ExternalBackend {
    pub command: String,
    pub workdir: Option<PathBuf>,
    pub timeout: Duration,
    /// Queries beyond this many rows are split into chunks sharing the context.
    pub max_query_rows: usize,
    pub max_concurrent: usize,
}

impl ExternalBackend {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalBackend {
            command: command.into(),
            workdir: None,
            timeout: DEFAULT_TIMEOUT,
            max_query_rows: DEFAULT_MAX_QUERY_ROWS,
            max_concurrent: 1,
        }
    }
}

impl InContextBackend for ExternalBackend {
    fn name(&self) -> String {
        format!("external({})", self.command)
    }

    // one model process at a time unless chunking asks for more
    fn parallel_tasks(&self) -> bool {
        false
    }

    fn predict(&self, task: &InContextTask) -> Result<ScoreVector> {
        let u = task.query_len();
        let cap = self.max_query_rows.max(1);
        if u <= cap {
            return predict_external(task, &self.command, self.workdir.as_deref(), self.timeout);
        }
        let chunks: Vec<_> = (0..u)
            .step_by(cap)
            .map(|s| task.query_chunk(s..(s + cap).min(u)))
            .collect();
        let mut out = Vec::with_capacity(u);
        for wave in chunks.chunks(self.max_concurrent.max(1)) {
            let results: Vec<Result<ScoreVector>> = thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| {
                        scope.spawn(move || {
                            predict_external(
                                chunk,
                                &self.command,
                                self.workdir.as_deref(),
                                self.timeout,
                            )
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("backend worker panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?.into_vec());
            }
        }
        Ok(ScoreVector(out))
    }
}

/// Runs one external-backend invocation for the whole task.
///
/// Inputs and output live in a fresh temporary directory (inside `workdir`
/// when given) that is removed before returning.
pub fn predict_external(
    task: &InContextTask,
    command: &str,
    workdir: Option<&Path>,
    timeout: Duration,
) -> Result<ScoreVector> {
    let tmp = match workdir {
        Some(dir) => tempfile::Builder::new().prefix("flatgad-").tempdir_in(dir),
        None => tempfile::Builder::new().prefix("flatgad-").tempdir(),
    }?;
    let paths = [
        ("{train_x}", tmp.path().join("train_x.csv")),
        ("{train_y}", tmp.path().join("train_y.txt")),
        ("{test_x}", tmp.path().join("test_x.csv")),
        ("{out}", tmp.path().join("scores.txt")),
    ];
    task.train.export(&paths[0].1)?;
    let labels: String = task.train_y.iter().map(|y| format!("{y}\n")).collect();
    fs::write(&paths[1].1, labels).map_err(|e| Error::io(&paths[1].1, e))?;
    task.test.export(&paths[2].1)?;

    let argv = shlex::split(command)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| Error::InvalidArgument(format!("cannot parse command template {command:?}")))?;
    let argv: Vec<String> = argv
        .into_iter()
        .map(|tok| {
            paths.iter().fold(tok, |t, (ph, p)| {
                t.replace(ph, &p.to_string_lossy())
            })
        })
        .collect();

    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped());
    if let Some(dir) = workdir {
        cmd.current_dir(dir);
    }
    let mut child = cmd
        .spawn()
        .map_err(|e| Error::BackendFailed {
            status: "spawn failure".into(),
            stderr: format!("{}: {e}", argv[0]),
        })?;
    let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
    let stderr_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr_pipe.read_to_string(&mut s);
        s
    });

    let started = Instant::now();
    let mut nap = Duration::from_millis(2);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::BackendTimeout {
                secs: timeout.as_secs_f64(),
            });
        }
        thread::sleep(nap);
        nap = (nap * 2).min(Duration::from_millis(50));
    };
    let stderr = stderr_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(Error::BackendFailed {
            status: status.to_string(),
            stderr: stderr.trim().to_string(),
        });
    }
    let out_path = &paths[3].1;
    let text = fs::read_to_string(out_path).map_err(|e| Error::io(out_path, e))?;
    parse_scores(&text, task.query_len()).map(ScoreVector)
}

/// Parses backend output: one probability per line, exactly `expected` lines.
pub fn parse_scores(text: &str, expected: usize) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(expected);
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let tok = line.trim();
        let x: f64 = tok.parse().map_err(|_| Error::BackendOutput {
            line: line_no,
            msg: format!("not a number: {tok:?}"),
        })?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::ScoreOutOfRange {
                line: line_no,
                value: x,
            });
        }
        scores.push(x);
    }
    if scores.len() != expected {
        return Err(Error::ScoreCount {
            expected,
            found: scores.len(),
        });
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_match_short_circuits() {
        let task = InContextTask::from_matrices(
            array![[0.0, 0.0], [5.0, 1.0], [3.0, -2.0]],
            vec![0, 1, 0],
            array![[5.0, 1.0]],
        )
        .unwrap();
        assert_eq!(predict_knn(&task, 1).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn exact_match_ties_average() {
        let s = knn_scores(
            array![[1.0], [1.0], [4.0]].view(),
            &[1, 0, 0],
            array![[1.0]].view(),
            1,
        )
        .unwrap();
        assert_eq!(s, vec![0.5]);
    }

    #[test]
    fn all_negative_context_scores_zero() {
        let s = knn_scores(
            array![[0.0], [1.0], [2.0]].view(),
            &[0, 0, 0],
            array![[0.5], [7.0]].view(),
            3,
        )
        .unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn one_dimensional_weighting() {
        let task =
            InContextTask::from_matrices(array![[0.0], [10.0]], vec![0, 1], array![[2.5]]).unwrap();
        let s = predict_knn(&task, 2).unwrap();
        let expected = (1.0 / 7.5) / (1.0 / 2.5 + 1.0 / 7.5);
        assert!((s.as_slice()[0] - 0.25).abs() < 1e-12);
        assert!((s.as_slice()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn knn_argument_errors() {
        let task =
            InContextTask::from_matrices(array![[0.0], [10.0]], vec![0, 1], array![[2.5]]).unwrap();
        assert!(predict_knn(&task, 3).is_err());
        assert!(predict_knn(&task, 0).is_err());
    }

    #[test]
    fn task_validation() {
        assert!(matches!(
            InContextTask::from_matrices(array![[0.0], [1.0]], vec![0, 0], array![[0.5]]),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            InContextTask::from_matrices(array![[0.0]], vec![1], array![[0.5]]),
            Err(Error::SingleClass)
        ));
        assert!(InContextTask::from_matrices(array![[0.0], [1.0]], vec![0, 1], array![[0.5, 1.0]])
            .is_err());
        assert!(InContextTask::from_matrices(array![[0.0], [1.0]], vec![0], array![[0.5]]).is_err());
        assert!(
            InContextTask::from_matrices(array![[0.0], [f64::NAN]], vec![0, 1], array![[0.5]])
                .is_err()
        );
    }

    #[test]
    fn parse_scores_contract() {
        assert_eq!(parse_scores("0.5\n0.25\n1\n", 3).unwrap(), vec![0.5, 0.25, 1.0]);
        assert!(matches!(
            parse_scores("0.5\n0.5\n", 3),
            Err(Error::ScoreCount {
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(
            parse_scores("0.5\n1.7\n0.1\n", 3),
            Err(Error::ScoreOutOfRange { line: 2, .. })
        ));
        assert!(matches!(
            parse_scores("0.5\nabc\n", 2),
            Err(Error::BackendOutput { line: 2, .. })
        ));
        assert!(matches!(
            parse_scores("0.5\nNaN\n", 2),
            Err(Error::ScoreOutOfRange { line: 2, .. })
        ));
    }

    #[test]
    fn score_vector_range() {
        assert!(ScoreVector::new(vec![0.0, 1.0, 0.3]).is_ok());
        assert!(ScoreVector::new(vec![1.2]).is_err());
    }
}
