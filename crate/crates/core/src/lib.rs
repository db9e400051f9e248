//! Test-time graph transformation.
//!
//! A frozen, pre-trained graph neural network is kept fixed while the test
//! graph itself is optimized: node features receive an additive perturbation
//! and existing edges may be deleted under a budget, both driven by a
//! label-free surrogate loss. The crate is organized bottom-up:
//!
//! - [`graph`]: sparse undirected graphs, file I/O, synthetic generation and
//!   interpretation statistics.
//! - [`gnn`]: two-layer GCN and linear SGC backbones with exact reverse-mode
//!   gradients w.r.t. features and relaxed edge weights.
//! - [`surrogate`]: self-supervised losses behind a common trait, selected by
//!   name through [`surrogate::SurrogateRegistry`].
//! - [`transform`]: the adaptation loop, budget projection, Bernoulli
//!   discretization and the gradient-correlation diagnostic.
//! - [`corruption`]: abnormal-feature injection and a block-PGD structure attack.

pub mod corruption;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod kv;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod surrogate;
pub mod transform;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{GtransError, Result};
pub use gnn::{BackboneKind, ForwardTrace, GcnModel, GradBundle};
pub use graph::{Graph, GraphStats, NormalizedAdjacency, Split, Topology};
pub use linalg::Matrix;
pub use surrogate::{Objective, SurrogateKind, SurrogateLoss, SurrogateRegistry};
pub use transform::{gtrans_adapt, AdaptReport, DeltaState, TransformConfig};
