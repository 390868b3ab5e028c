//! Undirected simple graphs in compressed-row form, node features and labels.
//!
//! Every undirected edge is stored twice (once per endpoint), rows are sorted
//! ascending, self-loops are dropped and multi-edges collapsed at construction.
//! All spectral kernels in this crate are built on [`Graph::adjacency_matvec`].

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Row count above which matvecs are split across threads.
pub(crate) const PARALLEL_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    degree: Vec<usize>,
}

impl Graph {
    /// Builds a graph from undirected edge pairs. Both orientations of an
    /// edge may appear; duplicates and self-loops are discarded.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "node count {n} exceeds 32-bit id space"
            )));
        }
        let mut pairs = Vec::new();
        for (i, (u, v)) in edges.into_iter().enumerate() {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange {
                        line: i + 1,
                        id: id as u64,
                        n,
                    });
                }
            }
            if u != v {
                pairs.push((u as u32, v as u32));
            }
        }
        Ok(Self::from_checked_pairs(n, &pairs))
    }

    fn from_checked_pairs(n: usize, pairs: &[(u32, u32)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(u, v) in pairs {
            counts[u as usize + 1] += 1;
            counts[v as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0u32; counts[n]];
        for &(u, v) in pairs {
            cols[fill[u as usize]] = v;
            fill[u as usize] += 1;
            cols[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }

        // sort + dedup each row, compacting in place
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut write = 0;
        for v in 0..n {
            let row = &mut cols[counts[v]..counts[v + 1]];
            row.sort_unstable();
            let mut last = None;
            for read in counts[v]..counts[v + 1] {
                let c = cols[read];
                if last != Some(c) {
                    cols[write] = c;
                    write += 1;
                    last = Some(c);
                }
            }
            row_offsets.push(write);
        }
        cols.truncate(write);
        cols.shrink_to_fit();
        let degree = row_offsets.windows(2).map(|w| w[1] - w[0]).collect();
        Graph {
            n,
            row_offsets,
            col_indices: cols,
            degree,
        }
    }

    /// Reads a whitespace-separated edge list with `n` declared nodes.
    pub fn load_edge_list<R: BufRead>(reader: R, n: usize) -> Result<Self> {
        Self::read_edges(reader, n, |tok, line| {
            let id: u64 = tok
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid node id {tok:?}")))?;
            if id >= n as u64 {
                return Err(Error::NodeOutOfRange { line, id, n });
            }
            Ok(id as u32)
        })
    }

    /// Reads an edge list whose ids are external tokens resolved through `ids`.
    pub fn load_edge_list_mapped<R: BufRead>(reader: R, ids: &IdMap) -> Result<Self> {
        Self::read_edges(reader, ids.len(), |tok, line| {
            ids.get(tok)
                .ok_or_else(|| Error::parse(line, format!("unknown node id {tok:?}")))
        })
    }

    fn read_edges<R, F>(reader: R, n: usize, mut resolve: F) -> Result<Self>
    where
        R: BufRead,
        F: FnMut(&str, usize) -> Result<u32>,
    {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut toks = trimmed.split_whitespace();
            let (Some(a), Some(b), None) = (toks.next(), toks.next(), toks.next()) else {
                return Err(Error::parse(line_no, "expected exactly two node ids"));
            };
            let u = resolve(a, line_no)?;
            let v = resolve(b, line_no)?;
            if u != v {
                pairs.push((u, v));
            }
        }
        Ok(Self::from_checked_pairs(n, &pairs))
    }

    pub fn load_edge_list_file(path: impl AsRef<Path>, n: usize) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load_edge_list(BufReader::new(f), n)
    }

    /// Writes each undirected edge once as `u v` with `u < v`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                if (u as u32) < v {
                    writeln!(w, "{u} {v}")?;
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.col_indices.len() / 2
    }

    /// Number of stored directed entries, i.e. twice the edge count.
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn degree(&self) -> &[usize] {
        &self.degree
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Iterates undirected edges once each, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// `y = A x`. Each row is summed sequentially in column order, so the
    /// result is bit-identical whether or not rows run in parallel.
    pub fn adjacency_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("adjacency_matvec input", self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        let row = |v: usize| -> f64 {
            let mut acc = 0.0;
            for &u in self.neighbors(v) {
                acc += x[u as usize];
            }
            acc
        };
        if self.n >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(v, out)| *out = row(v));
        } else {
            for (v, out) in y.iter_mut().enumerate() {
                *out = row(v);
            }
        }
        Ok(y)
    }

    /// Component count and per-node component ids, numbered in order of each
    /// component's smallest node id.
    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        const UNSEEN: usize = usize::MAX;
        let mut comp = vec![UNSEEN; self.n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if comp[s] != UNSEEN {
                continue;
            }
            comp[s] = count;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &u in self.neighbors(v) {
                    let u = u as usize;
                    if comp[u] == UNSEEN {
                        comp[u] = count;
                        queue.push_back(u);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    /// SHA-256 over node count and adjacency arrays.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for &o in &self.row_offsets {
            h.update((o as u64).to_le_bytes());
        }
        for &c in &self.col_indices {
            h.update(c.to_le_bytes());
        }
        h.finalize().into()
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// Maps external node tokens to dense 0-based ids (line order of the sidecar file).
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    ids: HashMap<String, u32>,
}

impl IdMap {
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut ids = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let tok = line.trim();
            if tok.is_empty() {
                return Err(Error::parse(i + 1, "empty id"));
            }
            let next = ids.len() as u32;
            if ids.insert(tok.to_string(), next).is_some() {
                return Err(Error::parse(i + 1, format!("duplicate id {tok:?}")));
            }
        }
        Ok(IdMap { ids })
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Dense node-feature matrix, one row per node, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        check_finite("feature matrix", values.view())?;
        Ok(FeatureMatrix(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            check_len("feature row width", d, r.len())?;
            data.extend_from_slice(r);
        }
        let arr = Array2::from_shape_vec((rows.len(), d), data)
            .expect("shape matches collected data");
        Self::new(arr)
    }

    /// Parses comma-separated rows; a first row whose first field is not
    /// numeric is treated as a header and skipped.
    pub fn load_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut data = Vec::new();
        let mut width = None;
        let mut rows = 0;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if rows == 0 && width.is_none() && fields[0].parse::<f64>().is_err() {
                width = Some(fields.len());
                continue;
            }
            match width {
                Some(w) if w != fields.len() => {
                    return Err(Error::parse(
                        line_no,
                        format!("expected {w} columns, found {}", fields.len()),
                    ))
                }
                _ => width = Some(fields.len()),
            }
            for f in fields {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("invalid number {f:?}")))?;
                if !x.is_finite() {
                    return Err(Error::parse(line_no, format!("non-finite value {f:?}")));
                }
                data.push(x);
            }
            rows += 1;
        }
        let d = if rows == 0 { 0 } else { width.unwrap_or(0) };
        let arr = Array2::from_shape_vec((rows, d), data).expect("rows have uniform width");
        Ok(FeatureMatrix(arr))
    }

    pub fn load_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load_csv(BufReader::new(f))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.0.rows() {
            let mut first = true;
            for x in row {
                if !first {
                    w.write_all(b",")?;
                }
                write!(w, "{x:?}")?;
                first = false;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

pub(crate) fn check_finite(what: &'static str, m: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), x) in m.indexed_iter() {
        if !x.is_finite() {
            return Err(Error::NonFinite { what, row, col });
        }
    }
    Ok(())
}

/// Binary node labels, 1 = anomaly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<u8>);

impl LabelVector {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidArgument(format!(
                "label {} at node {i} is not 0 or 1",
                labels[i]
            )));
        }
        Ok(LabelVector(labels))
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let tok = line.trim();
            if tok.is_empty() {
                continue;
            }
            match tok {
                "0" => out.push(0),
                "1" => out.push(1),
                _ => return Err(Error::parse(i + 1, format!("label must be 0 or 1, got {tok:?}"))),
            }
        }
        Ok(LabelVector(out))
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load(BufReader::new(f))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for y in &self.0 {
            writeln!(w, "{y}")?;
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_positive(&self) -> usize {
        self.0.iter().filter(|&&y| y == 1).count()
    }
}
