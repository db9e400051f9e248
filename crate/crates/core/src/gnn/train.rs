use super::{accuracy, masked_cross_entropy, GcnModel};
use crate::error::{GtransError, Result};
use crate::graph::{Graph, NormalizedAdjacency, Split};
use crate::optim::Adam;
use crate::rng::{seeded, sub_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
            weight_decay: 5e-4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_acc: Vec<f64>,
}

/// Full-batch Adam on the train-mask cross entropy (L2 weight decay added
/// to the gradient). Returns a trained copy; the input model is untouched.
pub fn train(model: &GcnModel, g: &Graph, cfg: &TrainConfig, seed: u64) -> Result<(GcnModel, TrainHistory)> {
    let train_nodes = g.nodes_in(Split::Train);
    if train_nodes.is_empty() {
        return Err(GtransError::Domain("empty train mask".into()));
    }
    let val_nodes = g.nodes_in(Split::Val);
    let adj = NormalizedAdjacency::new(g.topology().clone(), None)?;
    let mut model = model.clone();
    let mut params = model.params_vec();
    let mut adam = Adam::new(params.len());
    let mut rng = seeded(sub_seed(seed, "train-dropout", 0));
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let trace = model.forward_train(&adj, g.features(), &mut rng)?;
        let (loss, d_logits) = masked_cross_entropy(&trace.logits, g.labels(), &train_nodes)?;
        if !loss.is_finite() {
            return Err(GtransError::Divergence { epoch, loss });
        }
        let grads = model.backward(&trace, Some(&d_logits), None, true)?;
        let mut grad = grads.d_weights.expect("requested parameter gradients").flatten();
        for (gi, &p) in grad.iter_mut().zip(&params) {
            *gi += cfg.weight_decay * p;
        }
        adam.step(&mut params, &grad, cfg.lr);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(GtransError::Divergence { epoch, loss: f64::NAN });
        }
        model.set_params(&params);

        let eval = model.forward(&adj, g.features())?;
        history.loss.push(loss);
        history.train_acc.push(accuracy(&eval.logits, g.labels(), &train_nodes));
        history.val_acc.push(if val_nodes.is_empty() {
            f64::NAN
        } else {
            accuracy(&eval.logits, g.labels(), &val_nodes)
        });
    }
    Ok((model, history))
}
