//! Small numerical helpers shared across modules.

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

/// `log(Σ exp(x_i))`, skipping `-inf` terms. Returns `-inf` for an empty or
/// all-`-inf` input.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = iter
        .filter(|v| *v > f64::NEG_INFINITY)
        .map(|v| (v - max).exp())
        .sum();
    max + sum.ln()
}

/// Sum in a fixed binary-tree order. The result depends only on the input
/// order, never on how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let (left, right) = values.split_at(len / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}

/// Strongly connected components of the graph with an edge `i -> j` whenever
/// `m[(i, j)] > threshold`.
pub(crate) fn strongly_connected_components(m: &DMatrix<f64>, threshold: f64) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] > threshold {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    tarjan_scc(&graph)
        .into_iter()
        .map(|comp| {
            let mut idx: Vec<usize> = comp.into_iter().map(|n| n.index()).collect();
            idx.sort_unstable();
            idx
        })
        .collect()
}

const SPECTRAL_TOLERANCE: f64 = 1e-12;
const SPECTRAL_MAX_ITER: usize = 200_000;

/// Spectral radius of an entrywise nonnegative square matrix.
///
/// The matrix is split into its strongly connected blocks (its Frobenius
/// normal form); the radius is the largest block radius. Trivial blocks
/// contribute their diagonal entry, so a matrix whose positive-entry graph
/// is acyclic returns exactly 0. Each irreducible block is handled by power
/// iteration on `B + sI`, with `s` the smallest row sum of the block, until
/// the Collatz–Wielandt bounds agree to a relative 1e-12.
pub fn nonneg_spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    strongly_connected_components(m, 0.0)
        .iter()
        .map(|block| block_radius(m, block))
        .fold(0.0, f64::max)
}

fn block_radius(m: &DMatrix<f64>, block: &[usize]) -> f64 {
    if block.len() == 1 {
        return m[(block[0], block[0])];
    }
    let k = block.len();
    let sub = DMatrix::from_fn(k, k, |i, j| m[(block[i], block[j])]);
    let shift = sub
        .row_iter()
        .map(|r| r.sum())
        .fold(f64::INFINITY, f64::min);
    let shifted = &sub + DMatrix::identity(k, k) * shift;

    let mut v = nalgebra::DVector::from_element(k, 1.0);
    let mut estimate = f64::NAN;
    for _ in 0..SPECTRAL_MAX_ITER {
        let w = &shifted * &v;
        let (lo, hi) = w
            .iter()
            .zip(v.iter())
            .map(|(a, b)| a / b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            });
        estimate = 0.5 * (lo + hi);
        if hi - lo <= SPECTRAL_TOLERANCE * hi {
            break;
        }
        let scale = w.max();
        v = w / scale;
    }
    (estimate - shift).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_sentinels() {
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(vec![f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_sum_exp(vec![0.0, f64::NEG_INFINITY, 0.0]);
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let big = log_sum_exp(vec![1000.0, 1000.0]);
        assert!((big - 1000.0 - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn nilpotent_has_zero_radius() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(nonneg_spectral_radius(&m), 0.0);
    }

    #[test]
    fn periodic_and_reducible_radius() {
        // 2-cycle scaled by 0.5: eigenvalues ±0.5.
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!((nonneg_spectral_radius(&m) - 0.5).abs() < 1e-12);
        // block triangular: radius is the larger diagonal block.
        let m = DMatrix::from_row_slice(3, 3, &[0.2, 0.3, 0.0, 0.0, 0.1, 0.4, 0.0, 0.4, 0.1]);
        assert!((nonneg_spectral_radius(&m) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn uniform_block_radius() {
        let m = DMatrix::from_element(2, 2, 1.0 / 3.0);
        assert!((nonneg_spectral_radius(&m) - 2.0 / 3.0).abs() < 1e-12);
    }
}
