//! Finite-difference oracles and small fixtures for unit tests.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::graph::{Graph, Split, Topology};
use crate::linalg::Matrix;
use crate::rng::Rng;

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] += h;
    let mut xm = x.to_vec();
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Relative error with an absolute floor.
pub fn close(analytic: f64, numeric: f64, rel: f64, abs_floor: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= abs_floor || diff <= rel * analytic.abs().max(numeric.abs())
}

pub fn assert_grad(name: &str, analytic: &[f64], f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], rel: f64) {
    assert_eq!(analytic.len(), x.len());
    for i in 0..x.len() {
        let fd = central_diff(f, x, i, 1e-5);
        assert!(
            close(analytic[i], fd, rel, 1e-7),
            "{name}[{i}]: analytic {} vs numeric {fd}",
            analytic[i]
        );
    }
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for x in m.as_mut_slice() {
        *x = StandardNormal.sample(rng);
    }
    m
}

/// Random connected-ish graph: a path plus random chords.
pub fn random_graph(n: usize, d: usize, k: usize, rng: &mut Rng) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    for _ in 0..n {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        edges.push((u, v));
    }
    let (topo, _) = Topology::new(n, &edges).unwrap();
    let labels = (0..n).map(|i| i % k).collect();
    let splits = (0..n)
        .map(|i| match i % 3 {
            0 => Split::Train,
            1 => Split::Val,
            _ => Split::Test,
        })
        .collect();
    Graph::new(topo, gaussian_matrix(n, d, rng), labels, k, splits).unwrap()
}
