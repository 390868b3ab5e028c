//! Normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}` and its low end spectrum.
//!
//! Isolated nodes get `D^{-1/2} = 0`, so `L` acts as the identity on them and
//! the spectrum stays inside `[0, 2]`. Zero eigenvalues therefore come only
//! from components that contain at least one edge.
//!
//! Eigenpairs are found either by dense decomposition (small graphs) or by
//! Chebyshev-filtered subspace iteration, run in the complement of the null
//! space and the isolated nodes, both of which are known exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{check_len, Graph, PARALLEL_ROWS};

pub const DEFAULT_ZERO_TOL: f64 = 1e-8;
pub const DEFAULT_DENSE_MAX_NODES: usize = 2000;

#[derive(Debug, Clone)]
pub struct LaplacianOperator<'g> {
    graph: &'g Graph,
    inv_sqrt_degree: Vec<f64>,
}

impl<'g> LaplacianOperator<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        let inv_sqrt_degree = graph
            .degree()
            .iter()
            .map(|&d| if d > 0 { 1.0 / (d as f64).sqrt() } else { 0.0 })
            .collect();
        LaplacianOperator {
            graph,
            inv_sqrt_degree,
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn inv_sqrt_degree(&self) -> &[f64] {
        &self.inv_sqrt_degree
    }

    pub fn dim(&self) -> usize {
        self.graph.node_count()
    }

    #[inline]
    fn row(&self, v: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &u in self.graph.neighbors(v) {
            let u = u as usize;
            acc += self.inv_sqrt_degree[u] * x[u];
        }
        x[v] - self.inv_sqrt_degree[v] * acc
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("laplacian_matvec input", self.dim(), x.len())?;
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        if y.len() >= PARALLEL_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(v, out)| *out = self.row(v, x));
        } else {
            for (v, out) in y.iter_mut().enumerate() {
                *out = self.row(v, x);
            }
        }
    }

    /// Applies `L` to every column of `x` at once. Entry `(v, j)` is computed
    /// with exactly the operations `matvec` uses on column `j`.
    pub fn apply_columns(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let (n, d) = x.dim();
        check_len("laplacian input rows", self.dim(), n)?;
        let mut out = Array2::<f64>::zeros((n, d));
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let fill_row = |v: usize, out_row: &mut [f64], acc: &mut Vec<f64>| {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &u in self.graph.neighbors(v) {
                let u = u as usize;
                let s = self.inv_sqrt_degree[u];
                for (a, &xu) in acc.iter_mut().zip(&xs[u * d..(u + 1) * d]) {
                    *a += s * xu;
                }
            }
            let sv = self.inv_sqrt_degree[v];
            for ((o, &xv), &a) in out_row.iter_mut().zip(&xs[v * d..(v + 1) * d]).zip(acc.iter()) {
                *o = xv - sv * a;
            }
        };
        let slice = out.as_slice_mut().expect("fresh array is contiguous");
        if d == 0 {
            return Ok(out);
        }
        if n >= PARALLEL_ROWS {
            slice
                .par_chunks_mut(d)
                .enumerate()
                .for_each_init(|| vec![0.0; d], |acc, (v, row)| fill_row(v, row, acc));
        } else {
            let mut acc = vec![0.0; d];
            for (v, row) in slice.chunks_mut(d).enumerate() {
                fill_row(v, row, &mut acc);
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::<f64>::identity(n, n);
        for v in 0..n {
            for &u in self.graph.neighbors(v) {
                let u = u as usize;
                m[(v, u)] = -self.inv_sqrt_degree[v] * self.inv_sqrt_degree[u];
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenSolver {
    /// Dense decomposition up to `dense_max_nodes`, iterative above.
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct EmbeddingOptions {
    pub k: usize,
    pub zero_tol: f64,
    pub solver: EigenSolver,
    pub dense_max_nodes: usize,
    /// Seed for the iterative solver's start block.
    pub seed: u64,
    /// Residual norm `||L u - lambda u||` at which a Ritz pair is accepted.
    pub residual_tol: f64,
    pub max_restarts: usize,
}

impl EmbeddingOptions {
    pub fn new(k: usize) -> Self {
        EmbeddingOptions {
            k,
            zero_tol: DEFAULT_ZERO_TOL,
            solver: EigenSolver::Auto,
            dense_max_nodes: DEFAULT_DENSE_MAX_NODES,
            seed: 0,
            residual_tol: 1e-10,
            max_restarts: 300,
        }
    }
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        Self::new(16)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `n x k`, orthonormal non-padding columns.
    pub vectors: Array2<f64>,
    /// Retained eigenvalues, ascending; one per non-padding column.
    pub eigenvalues: Vec<f64>,
    /// Trailing all-zero columns added when fewer than `k` non-zero pairs exist.
    pub padded: usize,
    /// Eigenpairs found at or below the zero tolerance and discarded.
    pub zero_pairs: usize,
}

impl SpectralEmbedding {
    pub fn k(&self) -> usize {
        self.vectors.ncols()
    }
}

/// Eigenvectors for the `k` smallest non-zero eigenvalues of the normalized Laplacian.
pub fn laplacian_embeddings(g: &Graph, k: usize, zero_tol: f64) -> Result<SpectralEmbedding> {
    let opts = EmbeddingOptions {
        zero_tol,
        ..EmbeddingOptions::new(k)
    };
    laplacian_embeddings_with(g, &opts)
}

pub fn laplacian_embeddings_with(g: &Graph, opts: &EmbeddingOptions) -> Result<SpectralEmbedding> {
    if opts.k == 0 {
        return Err(Error::InvalidArgument("embedding dimension k must be >= 1".into()));
    }
    if !(opts.zero_tol >= 0.0) {
        return Err(Error::InvalidArgument("zero_tol must be non-negative".into()));
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidArgument("graph has no nodes".into()));
    }
    let op = LaplacianOperator::new(g);
    let use_dense = match opts.solver {
        EigenSolver::Dense => true,
        EigenSolver::Iterative => false,
        EigenSolver::Auto => n <= opts.dense_max_nodes,
    };
    let mut pairs = if use_dense {
        dense_smallest(&op, (nontrivial_components(g) + opts.k).min(n))
    } else {
        iterative_smallest(&op, opts)?
    };
    // stable: zero pairs first, and isolated-node pairs ahead of searched ones at 1
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let zero_pairs = pairs.iter().filter(|p| p.0 <= opts.zero_tol).count();
    let retained: Vec<_> = pairs
        .into_iter()
        .filter(|p| p.0 > opts.zero_tol)
        .take(opts.k)
        .collect();

    let mut vectors = Array2::<f64>::zeros((n, opts.k));
    let mut eigenvalues = Vec::with_capacity(retained.len());
    for (j, (lambda, mut u)) in retained.into_iter().enumerate() {
        canonicalize_sign(&mut u);
        for (v, x) in u.into_iter().enumerate() {
            vectors[[v, j]] = x;
        }
        eigenvalues.push(lambda);
    }
    Ok(SpectralEmbedding {
        padded: opts.k - eigenvalues.len(),
        vectors,
        eigenvalues,
        zero_pairs,
    })
}

/// Components with at least one edge; each contributes one zero eigenvalue.
pub fn nontrivial_components(g: &Graph) -> usize {
    let (count, comp) = g.connected_components();
    let mut has_edge = vec![false; count];
    for (v, &c) in comp.iter().enumerate() {
        if g.degree()[v] > 0 {
            has_edge[c] = true;
        }
    }
    has_edge.into_iter().filter(|&b| b).count()
}

/// Flips `u` so its largest-magnitude entry is positive. Entries within a
/// relative 1e-10 of the maximum count as tied; the smallest index wins.
pub fn canonicalize_sign(u: &mut [f64]) {
    let max = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = u
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-10))
        .expect("maximum is attained");
    if u[pivot] < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_smallest(op: &LaplacianOperator<'_>, want: usize) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .take(want)
        .map(|j| {
            let u = eig.eigenvectors.column(j).iter().copied().collect();
            (eig.eigenvalues[j], u)
        })
        .collect()
}

/// The null space of `L` and the isolated-node eigenvectors, both known in
/// closed form: `D^{1/2} 1_C` (eigenvalue 0) for every component `C` with an
/// edge, and `e_v` (eigenvalue 1) for every isolated node `v`. Projecting
/// them out costs O(n) per column and needs no stored vectors.
struct Deflation {
    comp: Vec<usize>,
    sqrt_degree: Vec<f64>,
    /// `1 / vol(C)` per component; zero for isolated nodes.
    inv_volume: Vec<f64>,
    kernel_dim: usize,
    isolated: Vec<usize>,
}

impl Deflation {
    fn new(g: &Graph) -> Self {
        let (count, comp) = g.connected_components();
        let mut volume = vec![0.0; count];
        for (v, &c) in comp.iter().enumerate() {
            volume[c] += g.degree()[v] as f64;
        }
        Deflation {
            sqrt_degree: g.degree().iter().map(|&d| (d as f64).sqrt()).collect(),
            inv_volume: volume.iter().map(|&w| if w > 0.0 { 1.0 / w } else { 0.0 }).collect(),
            kernel_dim: volume.iter().filter(|&&w| w > 0.0).count(),
            isolated: (0..g.node_count()).filter(|&v| g.degree()[v] == 0).collect(),
            comp,
        }
    }

    fn dim(&self) -> usize {
        self.kernel_dim + self.isolated.len()
    }

    fn project_out(&self, x: &mut Array2<f64>) {
        let b = x.ncols();
        let mut coef = Array2::<f64>::zeros((self.inv_volume.len(), b));
        for (v, &c) in self.comp.iter().enumerate() {
            coef.row_mut(c).scaled_add(self.sqrt_degree[v], &x.row(v));
        }
        for (v, &c) in self.comp.iter().enumerate() {
            let s = self.sqrt_degree[v];
            let mut row = x.row_mut(v);
            // isolated nodes have sqrt_degree 0 and are zeroed outright
            if s == 0.0 {
                row.fill(0.0);
            } else {
                row.scaled_add(-s * self.inv_volume[c], &coef.row(c));
            }
        }
    }
}

/// Largest value the filter polynomial takes on the spectrum, relative to
/// its bound of 1 on the damped interval. Rounding in a filtered block is
/// amplified by at most this factor relative to the wanted directions.
const FILTER_RANGE: f64 = 1e6;
const MAX_FILTER_DEGREE: usize = 30;

/// Degree of the Chebyshev filter damping `[cut, 2]`, capped so that its
/// value at 0 stays within [`FILTER_RANGE`].
fn filter_degree(cut: f64) -> usize {
    let t_max = (2.0 + cut) / (2.0 - cut);
    if !(t_max > 1.0 && t_max.is_finite()) {
        return 1;
    }
    let d = (FILTER_RANGE.acosh() / t_max.acosh()).floor();
    (d as usize).clamp(1, MAX_FILTER_DEGREE)
}

/// `p(L) X` with `p(λ) = T_d((c - λ) / e)`, where `c ± e` maps `[cut, 2]`
/// onto `[-1, 1]`. `p` is at most 1 in magnitude on the damped interval and
/// grows monotonically as `λ` falls below `cut`.
fn chebyshev_filter(op: &LaplacianOperator<'_>, x: &Array2<f64>, cut: f64, degree: usize) -> Result<Array2<f64>> {
    let (c, e) = ((2.0 + cut) / 2.0, (2.0 - cut) / 2.0);
    let mut prev = x.clone();
    let mut cur = op.apply_columns(x.view())?;
    Zip::from(&mut cur).and(x).for_each(|l, &xv| *l = (c * xv - *l) / e);
    for _ in 1..degree {
        let mut next = op.apply_columns(cur.view())?;
        Zip::from(&mut next)
            .and(&cur)
            .and(&prev)
            .for_each(|l, &y, &p| *l = 2.0 * (c * y - *l) / e - p);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Orthonormal basis for the columns of `y` (Cholesky QR, twice). Columns
/// that turn out numerically dependent are replaced by fresh random
/// directions from `rng`.
fn orthonormalize(y: &mut Array2<f64>, defl: &Deflation, rng: &mut ChaCha8Rng) {
    let b = y.ncols();
    for attempt in 0..4 {
        for mut col in y.columns_mut() {
            let nc = col.dot(&col).sqrt();
            if nc > 0.0 {
                col /= nc;
            }
        }
        if let Some(q) = cholesky_qr(y).and_then(|q| cholesky_qr(&q)) {
            *y = q;
            return;
        }
        // dependent columns: a Householder QR tells which ones to refresh
        let dense = DMatrix::from_fn(y.nrows(), b, |i, j| y[[i, j]]);
        let r = dense.qr().r();
        let big = (0..b).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
        for j in 0..b {
            if r[(j, j)].abs() <= 1e-8 * big || attempt == 3 {
                y.column_mut(j).mapv_inplace(|_| rng.random::<f64>() - 0.5);
            }
        }
        defl.project_out(y);
    }
    panic!("could not orthonormalize a random block");
}

fn cholesky_qr(y: &Array2<f64>) -> Option<Array2<f64>> {
    let b = y.ncols();
    let g = y.t().dot(y);
    let chol = DMatrix::from_fn(b, b, |i, j| g[[i, j]]).cholesky()?;
    let l = chol.l();
    if (0..b).any(|j| !(l[(j, j)] > 1e-7)) {
        return None;
    }
    // Y R^{-1} with R = L^T
    let r_inv = l.transpose().try_inverse()?;
    let r_inv = Array2::from_shape_fn((b, b), |(i, j)| r_inv[(i, j)]);
    Some(y.dot(&r_inv))
}

/// The `nev` smallest eigenpairs of `L` in the complement of `defl`, by
/// Chebyshev-filtered subspace iteration with Rayleigh-Ritz on `L` itself.
///
/// The block carries a margin of extra vectors; its largest Ritz value bounds
/// the `b`-th eigenvalue from above (interlacing) and serves as the cut
/// between amplified and damped parts of the spectrum.
fn filtered_subspace(
    op: &LaplacianOperator<'_>,
    defl: &Deflation,
    nev: usize,
    opts: &EmbeddingOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = op.dim();
    let avail = n - defl.dim();
    let nev = nev.min(avail);
    if nev == 0 {
        return Ok(Vec::new());
    }
    let b = (nev + nev.max(8)).min(avail);
    let tol = opts.residual_tol;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut y = Array2::from_shape_simple_fn((n, b), || rng.random::<f64>() - 0.5);
    defl.project_out(&mut y);
    let mut residuals = Vec::new();
    for _ in 0..=opts.max_restarts {
        orthonormalize(&mut y, defl, &mut rng);

        // Rayleigh-Ritz with L on span(Y)
        let ly = op.apply_columns(y.view())?;
        let h = y.t().dot(&ly);
        let eig = SymmetricEigen::new(DMatrix::from_fn(b, b, |i, j| 0.5 * (h[[i, j]] + h[[j, i]])));
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let s = Array2::from_shape_fn((b, b), |(i, j)| eig.eigenvectors[(i, order[j])]);
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let x = y.dot(&s);
        let lx = ly.dot(&s);

        residuals = (0..nev)
            .map(|j| {
                let r = &lx.column(j) - &(&x.column(j) * theta[j]);
                r.dot(&r).sqrt()
            })
            .collect();
        if residuals.iter().all(|&r| r <= tol) {
            return Ok((0..nev).map(|j| (theta[j], x.column(j).to_vec())).collect());
        }

        let cut = theta[b - 1];
        y = chebyshev_filter(op, &x, cut, filter_degree(cut))?;
        defl.project_out(&mut y);
    }
    Err(Error::EigenNoConvergence {
        iterations: opts.max_restarts,
        residuals,
    })
}

/// Every zero pair (vector omitted), the isolated-node pairs, and the `k`
/// smallest remaining eigenpairs from the filtered subspace iteration.
fn iterative_smallest(op: &LaplacianOperator<'_>, opts: &EmbeddingOptions) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = op.dim();
    let defl = Deflation::new(op.graph());
    let mut found = filtered_subspace(op, &defl, opts.k, opts)?;
    // near-zero values get discarded downstream; search past them
    let tiny = found.iter().filter(|p| p.0 <= opts.zero_tol).count();
    if tiny > 0 {
        found = filtered_subspace(op, &defl, opts.k + tiny, opts)?;
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..defl.kernel_dim).map(|_| (0.0, Vec::new())).collect();
    for &v in defl.isolated.iter().take(opts.k) {
        let mut e = vec![0.0; n];
        e[v] = 1.0;
        pairs.push((1.0, e));
    }
    pairs.extend(found);
    Ok(pairs)
}

const CACHE_MAGIC: &[u8; 8] = b"FGADEMB1";

/// Writes an embedding cache keyed on graph content, `k` and `zero_tol`.
pub fn store_cache(
    path: impl AsRef<Path>,
    g: &Graph,
    zero_tol: f64,
    emb: &SpectralEmbedding,
) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let (n, k) = emb.vectors.dim();
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&g.content_hash())?;
    for x in [k as u64, zero_tol.to_bits(), n as u64, emb.padded as u64, emb.zero_pairs as u64] {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&(emb.eigenvalues.len() as u64).to_le_bytes())?;
    for x in &emb.eigenvalues {
        w.write_all(&x.to_le_bytes())?;
    }
    for x in emb.vectors.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cached embedding; `Ok(None)` when the file is absent or was
/// produced for a different graph, `k` or `zero_tol`.
pub fn load_cache(
    path: impl AsRef<Path>,
    g: &Graph,
    k: usize,
    zero_tol: f64,
) -> Result<Option<SpectralEmbedding>> {
    let path = path.as_ref();
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut r = BufReader::new(f);
    let mut magic = [0u8; 8];
    let mut hash = [0u8; 32];
    if r.read_exact(&mut magic).is_err() || &magic != CACHE_MAGIC {
        return Ok(None);
    }
    r.read_exact(&mut hash)?;
    let mut word = || -> std::io::Result<u64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    };
    let (ck, ctol, cn, padded, zero_pairs, neig) =
        (word()?, word()?, word()?, word()?, word()?, word()?);
    if hash != g.content_hash()
        || ck != k as u64
        || ctol != zero_tol.to_bits()
        || cn != g.node_count() as u64
        || neig + padded != ck
    {
        return Ok(None);
    }
    let eigenvalues = (0..neig)
        .map(|_| word().map(f64::from_bits))
        .collect::<std::io::Result<Vec<_>>>()?;
    let data = (0..cn * ck)
        .map(|_| word().map(f64::from_bits))
        .collect::<std::io::Result<Vec<_>>>()?;
    let vectors = Array2::from_shape_vec((cn as usize, ck as usize), data)
        .expect("length matches header");
    Ok(Some(SpectralEmbedding {
        vectors,
        eigenvalues,
        padded: padded as usize,
        zero_pairs: zero_pairs as usize,
    }))
}

/// Loads from `path` when valid, otherwise computes and refreshes the cache.
pub fn laplacian_embeddings_cached(
    g: &Graph,
    opts: &EmbeddingOptions,
    path: impl AsRef<Path>,
) -> Result<SpectralEmbedding> {
    let path = path.as_ref();
    if let Some(e) = load_cache(path, g, opts.k, opts.zero_tol)? {
        return Ok(e);
    }
    let e = laplacian_embeddings_with(g, opts)?;
    store_cache(path, g, opts.zero_tol, &e)?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let path = graph(2, &[(0, 1)]);
        let op = LaplacianOperator::new(&path);
        assert_eq!(op.matvec(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0]);

        let empty = graph(3, &[]);
        let op = LaplacianOperator::new(&empty);
        assert_eq!(op.matvec(&[3.0, -1.5, 7.0]).unwrap(), vec![3.0, -1.5, 7.0]);

        let tri = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        let y = LaplacianOperator::new(&tri).matvec(&[1.0; 3]).unwrap();
        for x in y {
            assert!(x.abs() < 1e-15);
        }
        assert!(LaplacianOperator::new(&tri).matvec(&[1.0]).is_err());
    }

    #[test]
    fn inv_sqrt_degree_zero_on_isolated() {
        let g = graph(3, &[(0, 1)]);
        assert_eq!(LaplacianOperator::new(&g).inv_sqrt_degree(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn path_embedding() {
        for solver in [EigenSolver::Dense, EigenSolver::Iterative] {
            let g = graph(2, &[(0, 1)]);
            let opts = EmbeddingOptions {
                solver,
                ..EmbeddingOptions::new(1)
            };
            let e = laplacian_embeddings_with(&g, &opts).unwrap();
            assert!((e.eigenvalues[0] - 2.0).abs() < 1e-12, "{solver:?}");
            let h = std::f64::consts::FRAC_1_SQRT_2;
            assert!((e.vectors[[0, 0]] - h).abs() < 1e-12);
            assert!((e.vectors[[1, 0]] + h).abs() < 1e-12);
            assert_eq!((e.padded, e.zero_pairs), (0, 1));
        }
    }

    #[test]
    fn iterative_matches_dense_with_isolated_nodes() {
        // two cycles, a path, and three isolated nodes
        let mut edges = Vec::new();
        for i in 0..40 {
            edges.push((i, (i + 1) % 40));
            edges.push((40 + i, 40 + (i + 1) % 40));
        }
        for i in 80..119 {
            edges.push((i, i + 1));
        }
        let g = graph(123, &edges);
        let run = |solver| {
            let opts = EmbeddingOptions {
                solver,
                ..EmbeddingOptions::new(10)
            };
            laplacian_embeddings_with(&g, &opts).unwrap()
        };
        let (d, it) = (run(EigenSolver::Dense), run(EigenSolver::Iterative));
        assert_eq!((d.zero_pairs, it.zero_pairs), (3, 3));
        for (a, b) in d.eigenvalues.iter().zip(&it.eigenvalues) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let op = LaplacianOperator::new(&g);
        for j in 0..10 {
            let u = it.vectors.column(j).to_vec();
            let lu = op.matvec(&u).unwrap();
            let r: f64 = lu.iter().zip(&u).map(|(a, b)| (a - it.eigenvalues[j] * b).powi(2)).sum();
            assert!(r.sqrt() < 1e-9);
        }
    }

    #[test]
    fn triangle_multiplet() {
        for solver in [EigenSolver::Dense, EigenSolver::Iterative] {
            let g = graph(3, &[(0, 1), (1, 2), (2, 0)]);
            let opts = EmbeddingOptions {
                solver,
                ..EmbeddingOptions::new(2)
            };
            let e = laplacian_embeddings_with(&g, &opts).unwrap();
            assert_eq!(e.eigenvalues.len(), 2);
            for l in &e.eigenvalues {
                assert!((l - 1.5).abs() < 1e-10, "{solver:?}: {l}");
            }
        }
    }

    #[test]
    fn pads_when_spectrum_is_short() {
        let g = graph(3, &[(0, 1)]);
        let e = laplacian_embeddings(&g, 4, DEFAULT_ZERO_TOL).unwrap();
        // {0-1} gives eigenvalues 0 and 2, node 2 is isolated with eigenvalue 1
        assert_eq!(e.eigenvalues.len(), 2);
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((e.eigenvalues[1] - 2.0).abs() < 1e-12);
        assert_eq!(e.padded, 2);
        assert_eq!(e.zero_pairs, 1);
        assert!(e.vectors.column(2).iter().all(|&x| x == 0.0));
        assert!(e.vectors.column(3).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = graph(2, &[(0, 1)]);
        assert!(matches!(
            laplacian_embeddings(&g, 0, 1e-8),
            Err(Error::InvalidArgument(_))
        ));
        assert!(laplacian_embeddings(&graph(0, &[]), 1, 1e-8).is_err());
    }

    #[test]
    fn no_convergence_reports_residuals() {
        let edges: Vec<_> = (0..199).map(|i| (i, i + 1)).collect();
        let g = graph(200, &edges);
        let opts = EmbeddingOptions {
            solver: EigenSolver::Iterative,
            max_restarts: 1,
            residual_tol: 1e-300,
            ..EmbeddingOptions::new(4)
        };
        match laplacian_embeddings_with(&g, &opts) {
            Err(Error::EigenNoConvergence { residuals, .. }) => assert!(!residuals.is_empty()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn sign_canonicalization() {
        let mut u = vec![0.1, -0.9, 0.3];
        canonicalize_sign(&mut u);
        assert_eq!(u, vec![-0.1, 0.9, -0.3]);
        let mut u = vec![-0.5, 0.5];
        canonicalize_sign(&mut u);
        assert_eq!(u, vec![0.5, -0.5]);
    }

    #[test]
    fn apply_columns_matches_matvec_bitwise() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (1, 4), (0, 4)]);
        let op = LaplacianOperator::new(&g);
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 * 0.37 - 1.1);
        let block = op.apply_columns(x.view()).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = x.column(j).to_vec();
            let y = op.matvec(&col).unwrap();
            for v in 0..5 {
                assert_eq!(y[v].to_bits(), block[[v, j]].to_bits());
            }
        }
    }

    #[test]
    fn cache_round_trip_and_invalidation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        let opts = EmbeddingOptions::new(3);
        let e = laplacian_embeddings_cached(&g, &opts, &path).unwrap();
        assert_eq!(load_cache(&path, &g, 3, opts.zero_tol).unwrap(), Some(e.clone()));
        assert_eq!(load_cache(&path, &g, 2, opts.zero_tol).unwrap(), None);
        assert_eq!(load_cache(&path, &g, 3, 1e-6).unwrap(), None);
        let other = graph(6, &[(0, 1), (1, 2)]);
        assert_eq!(load_cache(&path, &other, 3, opts.zero_tol).unwrap(), None);
        assert_eq!(load_cache(dir.path().join("missing"), &g, 3, 1e-8).unwrap(), None);
    }
}
