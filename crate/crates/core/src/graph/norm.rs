use std::sync::Arc;

use super::Topology;
use crate::error::{GtransError, Result};
use crate::linalg::Matrix;

/// `D^{-1/2}(A+I)D^{-1/2}` over a topology with optional relaxed edge weights.
///
/// Weights are given per undirected edge, so symmetry holds by construction.
/// The self-loop weight is fixed at 1, hence every degree is at least 1.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    topology: Arc<Topology>,
    weights: Vec<f64>,
    degree: Vec<f64>,
    inv_sqrt_degree: Vec<f64>,
    edge_values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(topology: Arc<Topology>, weights: Option<&[f64]>) -> Result<Self> {
        let m = topology.num_edges();
        let weights = match weights {
            None => vec![1.0; m],
            Some(w) => {
                if w.len() != m {
                    return Err(GtransError::Dimension(format!(
                        "{} edge weights for {m} edges",
                        w.len()
                    )));
                }
                if let Some((e, &x)) = w.iter().enumerate().find(|(_, &x)| !(x >= 0.0) || !x.is_finite()) {
                    return Err(GtransError::Domain(format!("edge {e} has weight {x}")));
                }
                w.to_vec()
            }
        };
        let n = topology.num_nodes();
        let mut degree = vec![1.0; n];
        for (e, &(u, v)) in topology.edges().iter().enumerate() {
            degree[u as usize] += weights[e];
            degree[v as usize] += weights[e];
        }
        let inv_sqrt_degree: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let edge_values = topology
            .edges()
            .iter()
            .zip(&weights)
            .map(|(&(u, v), w)| w * inv_sqrt_degree[u as usize] * inv_sqrt_degree[v as usize])
            .collect();
        Ok(Self {
            topology,
            weights,
            degree,
            inv_sqrt_degree,
            edge_values,
        })
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.num_nodes()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    pub fn self_value(&self, i: usize) -> f64 {
        1.0 / self.degree[i]
    }

    pub fn edge_value(&self, e: usize) -> f64 {
        self.edge_values[e]
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Matrix {
        let n = self.num_nodes();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.self_value(i);
        }
        for (e, &(u, v)) in self.topology.edges().iter().enumerate() {
            m[(u as usize, v as usize)] = self.edge_values[e];
            m[(v as usize, u as usize)] = self.edge_values[e];
        }
        m
    }

    /// `Â · x`, accumulated row by row in CSR order.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        let n = self.num_nodes();
        if x.rows() != n {
            return Err(GtransError::Dimension(format!(
                "propagating {} rows over {n} nodes",
                x.rows()
            )));
        }
        let mut out = Matrix::zeros(n, x.cols());
        for i in 0..n {
            let s = self.self_value(i);
            let o = out.row_mut(i);
            for (oj, &xj) in o.iter_mut().zip(x.row(i)) {
                *oj = s * xj;
            }
            for (j, e) in self.topology.neighbors(i) {
                let a = self.edge_values[e];
                for (oj, &xj) in o.iter_mut().zip(x.row(j)) {
                    *oj += a * xj;
                }
            }
        }
        Ok(out)
    }

    /// Chain per-entry gradients `∂L/∂Â_ij` into per-edge weight gradients,
    /// through both the numerator and the relaxed degrees.
    pub fn edge_weight_grad(&self, g: &AdjGrad) -> Vec<f64> {
        let n = self.num_nodes();
        let mut d_degree = vec![0.0; n];
        for i in 0..n {
            // Â_ii = 1/d_i
            d_degree[i] -= g.diag[i] / (self.degree[i] * self.degree[i]);
        }
        let edges = self.topology.edges();
        for (e, &(u, v)) in edges.iter().enumerate() {
            let (u, v) = (u as usize, v as usize);
            let gsum = g.forward[e] + g.backward[e];
            let a = self.edge_values[e];
            d_degree[u] -= 0.5 * gsum * a / self.degree[u];
            d_degree[v] -= 0.5 * gsum * a / self.degree[v];
        }
        edges
            .iter()
            .enumerate()
            .map(|(e, &(u, v))| {
                let (u, v) = (u as usize, v as usize);
                let gsum = g.forward[e] + g.backward[e];
                gsum * self.inv_sqrt_degree[u] * self.inv_sqrt_degree[v] + d_degree[u] + d_degree[v]
            })
            .collect()
    }
}

/// Accumulated `∂L/∂Â` restricted to the sparsity pattern of `A+I`.
///
/// `forward[e]` holds the entry `(u,v)` and `backward[e]` the entry `(v,u)`
/// of undirected edge `e = (u,v)`, `u < v`.
#[derive(Debug, Clone)]
pub struct AdjGrad {
    pub diag: Vec<f64>,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
}

impl AdjGrad {
    pub fn zeros(topology: &Topology) -> Self {
        Self {
            diag: vec![0.0; topology.num_nodes()],
            forward: vec![0.0; topology.num_edges()],
            backward: vec![0.0; topology.num_edges()],
        }
    }

    /// For `out = Â · input`, add `∂L/∂Â_ij = <d_out_i, input_j>`.
    pub fn accumulate(&mut self, topology: &Topology, d_out: &Matrix, input: &Matrix) {
        use crate::linalg::dot;
        for i in 0..topology.num_nodes() {
            self.diag[i] += dot(d_out.row(i), input.row(i));
        }
        for (e, &(u, v)) in topology.edges().iter().enumerate() {
            let (u, v) = (u as usize, v as usize);
            self.forward[e] += dot(d_out.row(u), input.row(v));
            self.backward[e] += dot(d_out.row(v), input.row(u));
        }
    }
}
