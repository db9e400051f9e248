//! Self-supervised losses that steer test-time adaptation.
//!
//! Each loss implements [`SurrogateLoss`] and is looked up by name in a
//! [`SurrogateRegistry`]; [`Objective`] combines one with the optional
//! train-mask cross entropy as `L_train + λ·L_s`.

mod augment;
pub mod compactness;
mod losses;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use augment::{dropedge, dropedge_mask, shuffle_negatives};
pub use losses::{alignment_loss, contrastive_loss, entropy_loss, reconstruction_loss, sample_non_edges};

use crate::error::{GtransError, Result};
use crate::gnn::{masked_cross_entropy, ForwardTrace, GcnModel, GradBundle};
use crate::graph::{Graph, NormalizedAdjacency, Split};
use crate::linalg::Matrix;
use crate::rng::sub_seed;

/// Inputs shared by every surrogate: the frozen model, the current
/// (relaxed) adjacency, the current features and the forward pass on them.
pub struct SurrogateContext<'a> {
    pub model: &'a GcnModel,
    pub adj: &'a NormalizedAdjacency,
    pub features: &'a Matrix,
    pub main: &'a ForwardTrace,
    /// Seed for any augmentation or sampling the loss performs.
    pub seed: u64,
}

/// A label-free loss on the transformed graph.
///
/// Gradients are returned w.r.t. the features and the per-edge weights of
/// `ctx.adj`'s topology.
pub trait SurrogateLoss: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn value_and_grad(&self, ctx: &SurrogateContext<'_>) -> Result<(f64, GradBundle)>;
}

/// Contrastive loss against one DropEdge view and row-shuffled negatives,
/// both encoded through the same transformed adjacency.
#[derive(Debug, Clone)]
pub struct Contrastive {
    pub drop_ratio: f64,
}

impl SurrogateLoss for Contrastive {
    fn name(&self) -> &str {
        "contrastive"
    }

    fn value_and_grad(&self, ctx: &SurrogateContext<'_>) -> Result<(f64, GradBundle)> {
        let topo = ctx.adj.topology();
        let keep = dropedge_mask(topo.num_edges(), self.drop_ratio, sub_seed(ctx.seed, "dropedge", 0))?;
        let aug_weights: Vec<f64> = ctx
            .adj
            .weights()
            .iter()
            .zip(&keep)
            .map(|(&w, &k)| if k { w } else { 0.0 })
            .collect();
        let aug_adj = NormalizedAdjacency::new(topo.clone(), Some(&aug_weights))?;
        let aug = ctx.model.forward(&aug_adj, ctx.features)?;

        let (shuffled, perm) = shuffle_negatives(ctx.features, sub_seed(ctx.seed, "shuffle", 0))?;
        let neg = ctx.model.forward(ctx.adj, &shuffled)?;

        let (loss, dz, dz_hat, dz_tilde) = contrastive_loss(&ctx.main.hidden, &aug.hidden, &neg.hidden)?;

        let mut grads = ctx.model.backward(ctx.main, None, Some(&dz), false)?;
        let g_aug = ctx.model.backward(&aug, None, Some(&dz_hat), false)?;
        let g_neg = ctx.model.backward(&neg, None, Some(&dz_tilde), false)?;

        grads.d_features.add_assign(&g_aug.d_features);
        for (i, &p) in perm.iter().enumerate() {
            for (d, &s) in grads.d_features.row_mut(p).iter_mut().zip(g_neg.d_features.row(i)) {
                *d += s;
            }
        }
        for (e, g) in grads.d_edge_weights.iter_mut().enumerate() {
            if keep[e] {
                *g += g_aug.d_edge_weights[e];
            }
            *g += g_neg.d_edge_weights[e];
        }
        Ok((loss, grads))
    }
}

/// Mean prediction entropy over all nodes.
#[derive(Debug, Clone, Default)]
pub struct Entropy;

impl SurrogateLoss for Entropy {
    fn name(&self) -> &str {
        "entropy"
    }

    fn value_and_grad(&self, ctx: &SurrogateContext<'_>) -> Result<(f64, GradBundle)> {
        let all: Vec<usize> = (0..ctx.main.logits.rows()).collect();
        let (loss, d_logits) = entropy_loss(&ctx.main.logits, &all)?;
        let grads = ctx.model.backward(ctx.main, Some(&d_logits), None, false)?;
        Ok((loss, grads))
    }
}

/// Link reconstruction on Z: current edges (positive weight) against an
/// equal number of uniformly sampled non-edges.
#[derive(Debug, Clone, Default)]
pub struct Reconstruction;

impl SurrogateLoss for Reconstruction {
    fn name(&self) -> &str {
        "reconstruction"
    }

    fn value_and_grad(&self, ctx: &SurrogateContext<'_>) -> Result<(f64, GradBundle)> {
        let topo = ctx.adj.topology();
        let positives: Vec<(usize, usize)> = (0..topo.num_edges())
            .filter(|&e| ctx.adj.weights()[e] > 0.0)
            .map(|e| topo.edge(e))
            .collect();
        let negatives = sample_non_edges(topo, positives.len(), sub_seed(ctx.seed, "non-edges", 0))?;
        let (loss, dz) = reconstruction_loss(&ctx.main.hidden, &positives, &negatives)?;
        let grads = ctx.model.backward(ctx.main, None, Some(&dz), false)?;
        Ok((loss, grads))
    }
}

/// Which surrogate to use and how to weight it.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateKind {
    pub name: String,
    /// DropEdge ratio for the contrastive view.
    pub drop_ratio: f64,
    /// Weight of the surrogate when combined with the training loss.
    pub lambda: f64,
}

impl SurrogateKind {
    pub fn contrastive(drop_ratio: f64, lambda: f64) -> Self {
        Self {
            name: "contrastive".into(),
            drop_ratio,
            lambda,
        }
    }

    pub fn named(name: &str, lambda: f64) -> Self {
        Self {
            name: name.into(),
            drop_ratio: 0.5,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drop_ratio) {
            return Err(GtransError::Domain(format!(
                "drop ratio {} outside [0,1)",
                self.drop_ratio
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(GtransError::Domain(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        Ok(())
    }
}

pub type SurrogateFactory = fn(&SurrogateKind) -> Result<Arc<dyn SurrogateLoss>>;

/// Name → constructor table for surrogate losses.
#[derive(Clone)]
pub struct SurrogateRegistry {
    factories: BTreeMap<String, SurrogateFactory>,
}

impl fmt::Debug for SurrogateRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for SurrogateRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl SurrogateRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("contrastive", |k| {
            Ok(Arc::new(Contrastive {
                drop_ratio: k.drop_ratio,
            }))
        });
        r.register("entropy", |_| Ok(Arc::new(Entropy)));
        r.register("reconstruction", |_| Ok(Arc::new(Reconstruction)));
        r
    }

    /// Register (or replace) a factory under `name`.
    pub fn register(&mut self, name: &str, factory: SurrogateFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, kind: &SurrogateKind) -> Result<Arc<dyn SurrogateLoss>> {
        kind.validate()?;
        let factory = self.factories.get(&kind.name).ok_or_else(|| {
            GtransError::Config(format!(
                "unknown surrogate {:?}; known: {}",
                kind.name,
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(kind)
    }
}

/// `[CE on train mask] + λ·L_s`.
#[derive(Debug, Clone)]
pub struct Objective {
    pub surrogate: Arc<dyn SurrogateLoss>,
    pub lambda: f64,
    pub include_train_loss: bool,
}

/// One evaluation of an [`Objective`].
#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub total: f64,
    pub train_loss: Option<f64>,
    pub surrogate_loss: Option<f64>,
    pub grads: GradBundle,
}

impl Objective {
    pub fn new(registry: &SurrogateRegistry, kind: &SurrogateKind, include_train_loss: bool) -> Result<Self> {
        Ok(Self {
            surrogate: registry.build(kind)?,
            lambda: kind.lambda,
            include_train_loss,
        })
    }

    /// Evaluate on `g`'s topology with relaxed `weights` and `features`.
    /// Gradients are w.r.t. those weights and features.
    pub fn evaluate(
        &self,
        model: &GcnModel,
        g: &Graph,
        weights: &[f64],
        features: &Matrix,
        seed: u64,
    ) -> Result<ObjectiveValue> {
        let adj = NormalizedAdjacency::new(g.topology().clone(), Some(weights))?;
        let main = model.forward(&adj, features)?;
        let mut grads = GradBundle::zeros(g.num_nodes(), features.cols(), g.num_edges());
        let mut total = 0.0;

        let train_loss = if self.include_train_loss {
            let train = g.nodes_in(Split::Train);
            let (ce, d_logits) = masked_cross_entropy(&main.logits, g.labels(), &train)?;
            let b = model.backward(&main, Some(&d_logits), None, false)?;
            grads.add_scaled(&b, 1.0);
            total += ce;
            Some(ce)
        } else {
            None
        };

        // A zero-weighted surrogate is skipped entirely when it cannot matter.
        let surrogate_loss = if self.lambda != 0.0 || !self.include_train_loss {
            let ctx = SurrogateContext {
                model,
                adj: &adj,
                features,
                main: &main,
                seed,
            };
            let (ls, b) = self.surrogate.value_and_grad(&ctx)?;
            grads.add_scaled(&b, self.lambda);
            total += self.lambda * ls;
            Some(ls)
        } else {
            None
        };
        Ok(ObjectiveValue {
            total,
            train_loss,
            surrogate_loss,
            grads,
        })
    }
}

#[cfg(test)]
mod tests;
