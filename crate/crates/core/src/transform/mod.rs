//! Test-time graph transformation: alternating projected-Adam updates of a
//! feature perturbation and relaxed edge deletions, followed by K-trial
//! Bernoulli discretization.

mod config;
mod delta;
mod diagnostic;
mod projection;
mod report;
mod sample;

use std::time::Instant;

pub use config::TransformConfig;
pub use delta::{feature_step, relaxed_transformed_adjacency, structure_step, surrogate_value_and_grad, DeltaState};
pub use diagnostic::{
    classification_value_and_grad, flatten_objective_grad, gradient_correlation, theorem1_diagnostic, Diagnostic,
};
pub use projection::project_budget;
pub use report::{AdaptReport, EpochRecord, StepKind};
pub use sample::{bernoulli_keep, sample_discrete, Discretized};

use crate::error::{GtransError, Result};
use crate::gnn::{checkpoint_digest, GcnModel};
use crate::graph::{graph_stats, Graph, Split};
use crate::linalg::Matrix;
use crate::optim::Adam;
use crate::rng::sub_seed;
use crate::surrogate::Objective;

/// Which variable epoch `t` updates under the alternating schedule.
pub fn step_kind(t: usize, tau1: usize, tau2: usize) -> StepKind {
    if t % (tau1 + tau2) < tau1 {
        StepKind::Feature
    } else {
        StepKind::Structure
    }
}

/// Run the full adaptation on a frozen model.
pub fn gtrans_adapt(
    model: &GcnModel,
    g: &Graph,
    objective: &Objective,
    cfg: &TransformConfig,
) -> Result<(Graph, AdaptReport)> {
    cfg.validate()?;
    let started = Instant::now();
    let digest = checkpoint_digest(model);
    let budget = cfg.budget_fraction * g.num_edges() as f64;
    let mut delta = DeltaState::zeros(g, budget);
    let mut adam_x = Adam::new(g.num_nodes() * g.feature_dim());
    let mut adam_a = Adam::new(g.num_edges());
    let test_nodes = g.nodes_in(Split::Test);

    let mut trajectory = Vec::with_capacity(cfg.epochs);
    for t in 0..cfg.epochs {
        let seed = sub_seed(cfg.seed, "epoch", t as u64);
        let val = surrogate_value_and_grad(objective, model, g, &delta, seed)?;
        if !val.total.is_finite() {
            return Err(GtransError::Divergence { epoch: t, loss: val.total });
        }
        let rho = if cfg.track_rho && !test_nodes.is_empty() {
            let (_, gc) = classification_value_and_grad(model, g, &delta, &test_nodes)?;
            let mut gs = val.grads.d_features.as_slice().to_vec();
            gs.extend_from_slice(&val.grads.d_edge_weights);
            gradient_correlation(&gc, &gs).ok()
        } else {
            None
        };
        let kind = step_kind(t, cfg.tau1, cfg.tau2);
        match kind {
            StepKind::Feature => feature_step(&mut delta, &val.grads.d_features, cfg.eta1, &mut adam_x)?,
            StepKind::Structure => structure_step(&mut delta, &val.grads.d_edge_weights, cfg.eta2, &mut adam_a)?,
        }
        log::debug!("epoch {t} {kind:?} loss {:.6}", val.total);
        trajectory.push(EpochRecord {
            epoch: t,
            step: kind,
            loss: val.total,
            delta_mass: delta.mass(),
            delta_max: delta.delta_a.iter().cloned().fold(0.0, f64::max),
            rho,
        });
    }

    let final_relaxed_loss =
        surrogate_value_and_grad(objective, model, g, &delta, sub_seed(cfg.seed, "epoch", 0))?.total;
    let loss_increased = final_relaxed_loss > trajectory[0].loss;
    if loss_increased {
        log::warn!("relaxed loss rose from {} to {final_relaxed_loss}", trajectory[0].loss);
    }

    let features = delta.features(g);
    let eval_seed = sub_seed(cfg.seed, "sample-eval", 0);
    let eval = |w: &[f64]| sample_loss(objective, model, g, w, &features, eval_seed);
    let out = sample_discrete(g, &delta, cfg.samples, &eval, sub_seed(cfg.seed, "sample", 0))?;

    if checkpoint_digest(model) != digest {
        return Err(GtransError::Consistency("model changed during adaptation".into()));
    }
    let flipped_edges = out.deleted.iter().map(|&e| delta.candidates.edge(e)).collect();
    let report = AdaptReport {
        config: cfg.clone(),
        budget,
        trajectory,
        final_relaxed_loss,
        loss_increased,
        chosen_sample: out.chosen,
        sample_losses: out.losses,
        flipped_edges,
        stats_before: graph_stats(g, None).ok(),
        stats_after: graph_stats(&out.graph, Some(g)).ok(),
        model_digest: digest,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((out.graph, report))
}

fn sample_loss(
    objective: &Objective,
    model: &GcnModel,
    g: &Graph,
    weights: &[f64],
    features: &Matrix,
    seed: u64,
) -> Result<f64> {
    Ok(objective.evaluate(model, g, weights, features, seed)?.total)
}
