//! Beta wavelet filter bank on the normalized Laplacian.
//!
//! `W_{p,q} = (p+q+1)! / (2 p! q!) * (L/2)^p (I - L/2)^q`, evaluated
//! matrix-free. A bank of order `C` holds the `C+1` filters with `p + q = C`,
//! ordered by increasing `p`, and the filters sum to `(C+1)/2 * I`.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{check_len, FeatureMatrix, Graph};
use crate::spectral::LaplacianOperator;

/// Largest supported `p + q`; `13!` is the biggest factorial needed.
pub const MAX_ORDER: usize = 12;

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// `1 / (2 B(p+1, q+1)) = (p+q+1)! / (2 p! q!)`.
pub fn beta_coefficient(p: usize, q: usize) -> Result<f64> {
    if p + q > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "wavelet order p+q = {} exceeds {MAX_ORDER}",
            p + q
        )));
    }
    let ratio = factorial(p + q + 1) / (factorial(p) * factorial(q));
    Ok(ratio as f64 / 2.0)
}

/// `W_{p,q} X`: `q` applications of `I - L/2`, then `p` of `L/2`, then the
/// coefficient.
pub fn apply_wavelet(g: &Graph, x: &FeatureMatrix, p: usize, q: usize) -> Result<Array2<f64>> {
    check_len("feature rows", g.node_count(), x.nrows())?;
    let coef = beta_coefficient(p, q)?;
    let op = LaplacianOperator::new(g);
    apply_with(&op, x.view(), p, q, coef)
}

fn apply_with(
    op: &LaplacianOperator<'_>,
    x: ArrayView2<'_, f64>,
    p: usize,
    q: usize,
    coef: f64,
) -> Result<Array2<f64>> {
    let mut y = x.to_owned();
    for _ in 0..q {
        let ly = op.apply_columns(y.view())?;
        y.zip_mut_with(&ly, |a, &b| *a -= 0.5 * b);
    }
    for _ in 0..p {
        let mut ly = op.apply_columns(y.view())?;
        ly.mapv_inplace(|b| 0.5 * b);
        y = ly;
    }
    y.mapv_inplace(|a| coef * a);
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBankOutput {
    pub order: usize,
    /// `blocks[p]` is `W_{p, order-p} X`.
    pub blocks: Vec<Array2<f64>>,
}

impl WaveletBankOutput {
    /// Blocks side by side, `n x d(C+1)`.
    pub fn concatenated(&self) -> Array2<f64> {
        let views: Vec<_> = self.blocks.iter().map(|b| b.view()).collect();
        concatenate(Axis(1), &views).expect("blocks share row count")
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    /// `(p, q)` for each block in order.
    pub fn filters(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.order).map(move |p| (p, self.order - p))
    }
}

pub fn wavelet_bank(g: &Graph, x: &FeatureMatrix, order: usize) -> Result<WaveletBankOutput> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "filter bank order {order} outside 1..={MAX_ORDER}"
        )));
    }
    check_len("feature rows", g.node_count(), x.nrows())?;
    let op = LaplacianOperator::new(g);
    let blocks = (0..=order)
        .into_par_iter()
        .map(|p| {
            let q = order - p;
            apply_with(&op, x.view(), p, q, beta_coefficient(p, q)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WaveletBankOutput { order, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges.iter().copied()).unwrap()
    }

    fn features(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn coefficients() {
        assert_eq!(beta_coefficient(0, 1).unwrap(), 1.0);
        assert_eq!(beta_coefficient(1, 0).unwrap(), 1.0);
        assert_eq!(beta_coefficient(1, 1).unwrap(), 3.0);
        assert_eq!(beta_coefficient(0, 0).unwrap(), 0.5);
        // 13! / (2 * 6! * 6!)
        assert_eq!(beta_coefficient(6, 6).unwrap(), 6006.0);
        assert!(beta_coefficient(7, 6).is_err());
    }

    #[test]
    fn identity_filter_halves() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let x = features(&[&[1.0, -2.0], &[0.5, 4.0], &[3.0, 0.0]]);
        let y = apply_wavelet(&g, &x, 0, 0).unwrap();
        assert_eq!(y, x.as_array() * 0.5);
    }

    #[test]
    fn edgeless_graph_filters() {
        let g = graph(2, &[]);
        let x = features(&[&[2.0], &[-6.0]]);
        assert_eq!(apply_wavelet(&g, &x, 0, 1).unwrap(), x.as_array() * 0.5);
        assert_eq!(apply_wavelet(&g, &x, 1, 0).unwrap(), x.as_array() * 0.5);
    }

    #[test]
    fn path_high_pass() {
        let g = graph(2, &[(0, 1)]);
        let x = features(&[&[1.0], &[0.0]]);
        let y = apply_wavelet(&g, &x, 1, 0).unwrap();
        assert_eq!(y.as_slice().unwrap(), &[0.5, -0.5]);
    }

    #[test]
    fn first_order_bank_sums_to_input() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let x = features(&[&[1.0, 2.0], &[-1.0, 0.5], &[3.0, 3.0], &[0.0, -7.0]]);
        let bank = wavelet_bank(&g, &x, 1).unwrap();
        let sum = &bank.blocks[0] + &bank.blocks[1];
        for (a, b) in sum.iter().zip(x.view().iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn bank_shape() {
        let g = graph(5, &[(0, 1), (2, 3)]);
        let x = FeatureMatrix::new(Array2::from_elem((5, 10), 1.0)).unwrap();
        let bank = wavelet_bank(&g, &x, 3).unwrap();
        assert_eq!(bank.blocks.len(), 4);
        assert_eq!(bank.width(), 40);
        assert_eq!(bank.concatenated().dim(), (5, 40));
        assert_eq!(bank.filters().collect::<Vec<_>>(), vec![(0, 3), (1, 2), (2, 1), (3, 0)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = graph(3, &[(0, 1)]);
        let x = features(&[&[1.0], &[2.0]]);
        assert!(matches!(
            apply_wavelet(&g, &x, 1, 0),
            Err(Error::DimensionMismatch { .. })
        ));
        let x = features(&[&[1.0], &[2.0], &[3.0]]);
        assert!(wavelet_bank(&g, &x, 0).is_err());
        assert!(wavelet_bank(&g, &x, 13).is_err());
    }
}
