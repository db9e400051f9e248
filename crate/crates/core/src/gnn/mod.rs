//! Two-layer GCN and a linear SGC-style backbone with exact reverse-mode
//! gradients w.r.t. parameters, node features and relaxed edge weights.
//!
//! `gcn2`: `Z = ReLU(Â X W1 + b1)`, `logits = Â Z W2 + b2`
//! `sgc2`: `Z = Â Â X W1`, `logits = Z W2 + b2`

mod checkpoint;
mod loss;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

pub use checkpoint::{checkpoint_digest, load_checkpoint, parse_checkpoint, save_checkpoint, to_checkpoint};
pub use loss::{accuracy, masked_cross_entropy, predictions, softmax_rows};
pub use train::{train, TrainConfig, TrainHistory};

use crate::error::{GtransError, Result};
use crate::graph::{AdjGrad, NormalizedAdjacency};
use crate::linalg::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackboneKind {
    Gcn2,
    Sgc2,
}

impl BackboneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::Gcn2 => "gcn2",
            BackboneKind::Sgc2 => "sgc2",
        }
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneKind {
    type Err = GtransError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn2" | "gcn" => Ok(BackboneKind::Gcn2),
            "sgc2" | "sgc" => Ok(BackboneKind::Sgc2),
            _ => Err(GtransError::Config(format!("unknown backbone {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub kind: BackboneKind,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub dropout: f64,
}

/// Gradients w.r.t. model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Gradients of a scalar loss w.r.t. everything the adaptation touches.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    /// `∂L/∂X`, N×d.
    pub d_features: Matrix,
    /// `∂L/∂w_e` per undirected edge of the propagation topology.
    pub d_edge_weights: Vec<f64>,
    pub d_weights: Option<ModelGrads>,
}

impl GradBundle {
    pub fn zeros(n: usize, d: usize, edges: usize) -> Self {
        Self {
            d_features: Matrix::zeros(n, d),
            d_edge_weights: vec![0.0; edges],
            d_weights: None,
        }
    }

    /// `self += scale · other` over features and edge weights.
    pub fn add_scaled(&mut self, other: &GradBundle, scale: f64) {
        self.d_features.add_scaled(&other.d_features, scale);
        for (a, b) in self.d_edge_weights.iter_mut().zip(&other.d_edge_weights) {
            *a += scale * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_features.is_finite() && self.d_edge_weights.iter().all(|x| x.is_finite())
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub kind: BackboneKind,
    pub adj: NormalizedAdjacency,
    /// Input features after dropout (equal to X in inference mode).
    pub input: Matrix,
    pub input_mask: Option<Matrix>,
    /// `X W1`
    pub p1: Matrix,
    /// `Â X W1` (pre-bias for gcn2, the first propagation for sgc2).
    pub agg1: Matrix,
    /// Hidden representation Z fed to the last layer.
    pub hidden: Matrix,
    pub hidden_mask: Option<Matrix>,
    /// gcn2 only: `dropout(Z) W2`.
    pub p2: Option<Matrix>,
    pub logits: Matrix,
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for x in m.as_mut_slice() {
        *x = rng.random_range(-a..a);
    }
    m
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Matrix {
    let keep = 1.0 - rate;
    let mut m = Matrix::zeros(rows, cols);
    for x in m.as_mut_slice() {
        if rng.random::<f64>() < keep {
            *x = 1.0 / keep;
        }
    }
    m
}

impl GcnModel {
    /// Glorot-initialized weights, zero biases.
    pub fn init(kind: BackboneKind, d: usize, h: usize, k: usize, dropout: f64, rng: &mut Rng) -> Self {
        Self {
            kind,
            w1: glorot(d, h, rng),
            b1: vec![0.0; h],
            w2: glorot(h, k, rng),
            b2: vec![0.0; k],
            dropout,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.cols()
    }

    pub fn num_params(&self) -> usize {
        self.w1.as_slice().len() + self.b1.len() + self.w2.as_slice().len() + self.b2.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h) = self.w1.shape();
        if self.b1.len() != h || self.w2.rows() != h || self.b2.len() != self.w2.cols() {
            return Err(GtransError::Dimension(format!(
                "inconsistent model: W1 {d}x{h}, b1 {}, W2 {}x{}, b2 {}",
                self.b1.len(),
                self.w2.rows(),
                self.w2.cols(),
                self.b2.len()
            )));
        }
        let finite = self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|x| x.is_finite());
        if !finite {
            return Err(GtransError::Domain("non-finite model parameter".into()));
        }
        Ok(())
    }

    /// Parameters flattened as W1, b1, W2, b2 (row-major).
    pub fn params_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.w1.as_slice());
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn set_params(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.num_params());
        let mut off = 0;
        for dst in [
            self.w1.as_mut_slice(),
            &mut self.b1[..],
            self.w2.as_mut_slice(),
            &mut self.b2[..],
        ] {
            let len = dst.len();
            dst.copy_from_slice(&v[off..off + len]);
            off += len;
        }
    }

    /// Inference-mode forward pass (no dropout).
    pub fn forward(&self, adj: &NormalizedAdjacency, x: &Matrix) -> Result<ForwardTrace> {
        self.forward_impl(adj, x, None)
    }

    /// Training-mode forward pass with dropout drawn from `rng`.
    pub fn forward_train(&self, adj: &NormalizedAdjacency, x: &Matrix, rng: &mut Rng) -> Result<ForwardTrace> {
        self.forward_impl(adj, x, Some(rng))
    }

    fn forward_impl(&self, adj: &NormalizedAdjacency, x: &Matrix, mut rng: Option<&mut Rng>) -> Result<ForwardTrace> {
        self.validate()?;
        if x.cols() != self.input_dim() || x.rows() != adj.num_nodes() {
            return Err(GtransError::Dimension(format!(
                "features {}x{} for a model with d={} over {} nodes",
                x.rows(),
                x.cols(),
                self.input_dim(),
                adj.num_nodes()
            )));
        }
        if !x.is_finite() {
            return Err(GtransError::Domain("non-finite input feature".into()));
        }
        let use_dropout = rng.is_some() && self.dropout > 0.0;
        let input_mask = match rng.as_deref_mut() {
            Some(r) if use_dropout => Some(dropout_mask(x.rows(), x.cols(), self.dropout, r)),
            _ => None,
        };
        let input = match &input_mask {
            Some(m) => x.hadamard(m),
            None => x.clone(),
        };
        let p1 = input.matmul(&self.w1)?;
        let agg1 = adj.spmm(&p1)?;
        match self.kind {
            BackboneKind::Gcn2 => {
                let mut s1 = agg1.clone();
                s1.add_row_vector(&self.b1);
                let hidden = s1.map(|v| v.max(0.0));
                let hidden_mask = match rng {
                    Some(r) if use_dropout => {
                        Some(dropout_mask(hidden.rows(), hidden.cols(), self.dropout, r))
                    }
                    _ => None,
                };
                let hidden_in = match &hidden_mask {
                    Some(m) => hidden.hadamard(m),
                    None => hidden.clone(),
                };
                let p2 = hidden_in.matmul(&self.w2)?;
                let mut logits = adj.spmm(&p2)?;
                logits.add_row_vector(&self.b2);
                Ok(ForwardTrace {
                    kind: self.kind,
                    adj: adj.clone(),
                    input,
                    input_mask,
                    p1,
                    agg1,
                    hidden,
                    hidden_mask,
                    p2: Some(p2),
                    logits,
                })
            }
            BackboneKind::Sgc2 => {
                let hidden = adj.spmm(&agg1)?;
                let mut logits = hidden.matmul(&self.w2)?;
                logits.add_row_vector(&self.b2);
                Ok(ForwardTrace {
                    kind: self.kind,
                    adj: adj.clone(),
                    input,
                    input_mask,
                    p1,
                    agg1,
                    hidden,
                    hidden_mask: None,
                    p2: None,
                    logits,
                })
            }
        }
    }

    /// Reverse-mode gradients given upstream gradients on the logits and/or
    /// the hidden representation Z.
    ///
    /// Edge-weight gradients cover every edge of the trace's topology and
    /// differentiate through the relaxed degree normalization.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        d_logits: Option<&Matrix>,
        d_hidden: Option<&Matrix>,
        param_grads: bool,
    ) -> Result<GradBundle> {
        if trace.kind != self.kind
            || trace.p1.cols() != self.hidden_dim()
            || trace.logits.cols() != self.num_classes()
            || trace.input.cols() != self.input_dim()
        {
            return Err(GtransError::Consistency(
                "trace was not produced by this model".into(),
            ));
        }
        let n = trace.adj.num_nodes();
        let topo = trace.adj.topology();
        for (name, m, cols) in [
            ("logits", d_logits, self.num_classes()),
            ("hidden", d_hidden, self.hidden_dim()),
        ] {
            if let Some(m) = m {
                if m.shape() != (n, cols) {
                    return Err(GtransError::Dimension(format!(
                        "upstream {name} gradient is {}x{}, expected {n}x{cols}",
                        m.rows(),
                        m.cols()
                    )));
                }
            }
        }
        let zero_logits;
        let d_logits = match d_logits {
            Some(m) => m,
            None => {
                zero_logits = Matrix::zeros(n, self.num_classes());
                &zero_logits
            }
        };

        let mut adj_grad = AdjGrad::zeros(topo);
        let db2 = d_logits.column_sums();
        let (dw1, db1, dw2, d_p1) = match self.kind {
            BackboneKind::Gcn2 => {
                let p2 = trace
                    .p2
                    .as_ref()
                    .ok_or_else(|| GtransError::Consistency("gcn2 trace without p2".into()))?;
                adj_grad.accumulate(topo, d_logits, p2);
                let d_p2 = trace.adj.spmm(d_logits)?;
                let hidden_in = match &trace.hidden_mask {
                    Some(m) => trace.hidden.hadamard(m),
                    None => trace.hidden.clone(),
                };
                let dw2 = hidden_in.t_matmul(&d_p2)?;
                let mut d_z = d_p2.matmul_t(&self.w2)?;
                if let Some(m) = &trace.hidden_mask {
                    d_z = d_z.hadamard(m);
                }
                if let Some(dh) = d_hidden {
                    d_z.add_assign(dh);
                }
                let mut d_s1 = d_z;
                for (g, &z) in d_s1.as_mut_slice().iter_mut().zip(trace.hidden.as_slice()) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
                let db1 = d_s1.column_sums();
                adj_grad.accumulate(topo, &d_s1, &trace.p1);
                let d_p1 = trace.adj.spmm(&d_s1)?;
                let dw1 = trace.input.t_matmul(&d_p1)?;
                (dw1, db1, dw2, d_p1)
            }
            BackboneKind::Sgc2 => {
                let dw2 = trace.hidden.t_matmul(d_logits)?;
                let mut d_z = d_logits.matmul_t(&self.w2)?;
                if let Some(dh) = d_hidden {
                    d_z.add_assign(dh);
                }
                adj_grad.accumulate(topo, &d_z, &trace.agg1);
                let d_q = trace.adj.spmm(&d_z)?;
                adj_grad.accumulate(topo, &d_q, &trace.p1);
                let d_p1 = trace.adj.spmm(&d_q)?;
                let dw1 = trace.input.t_matmul(&d_p1)?;
                (dw1, vec![0.0; self.hidden_dim()], dw2, d_p1)
            }
        };
        let mut d_features = d_p1.matmul_t(&self.w1)?;
        if let Some(m) = &trace.input_mask {
            d_features = d_features.hadamard(m);
        }
        let d_edge_weights = trace.adj.edge_weight_grad(&adj_grad);
        Ok(GradBundle {
            d_features,
            d_edge_weights,
            d_weights: param_grads.then_some(ModelGrads {
                w1: dw1,
                b1: db1,
                w2: dw2,
                b2: db2,
            }),
        })
    }
}

impl ModelGrads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(self.w1.as_slice());
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(&self.b2);
        v
    }
}

#[cfg(test)]
mod tests;
