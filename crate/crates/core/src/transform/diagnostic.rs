use crate::error::{GtransError, Result};
use crate::gnn::{masked_cross_entropy, GcnModel};
use crate::graph::{Graph, NormalizedAdjacency};
use crate::linalg::{dot, norm};
use crate::surrogate::Objective;

use super::delta::{relaxed_transformed_adjacency, surrogate_value_and_grad, DeltaState};

/// Result of the gradient-correlation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostic {
    pub rho: f64,
    pub epsilon: f64,
    pub lc_before: f64,
    pub lc_after: f64,
    pub descent_verified: bool,
}

/// Cross entropy on `nodes` of the relaxed transformed graph and its
/// gradient, flattened as `(ΔX, ΔA)`.
pub fn classification_value_and_grad(
    model: &GcnModel,
    g: &Graph,
    delta: &DeltaState,
    nodes: &[usize],
) -> Result<(f64, Vec<f64>)> {
    delta.check_against(g)?;
    let weights = relaxed_transformed_adjacency(delta);
    let adj = NormalizedAdjacency::new(g.topology().clone(), Some(&weights))?;
    let trace = model.forward(&adj, &delta.features(g))?;
    let (ce, d_logits) = masked_cross_entropy(&trace.logits, g.labels(), nodes)?;
    let b = model.backward(&trace, Some(&d_logits), None, false)?;
    let mut flat = b.d_features.into_vec();
    flat.extend(b.d_edge_weights.iter().map(|x| -x));
    Ok((ce, flat))
}

fn classification_loss(model: &GcnModel, g: &Graph, delta: &DeltaState, nodes: &[usize]) -> Result<f64> {
    let weights = relaxed_transformed_adjacency(delta);
    let adj = NormalizedAdjacency::new(g.topology().clone(), Some(&weights))?;
    let trace = model.forward(&adj, &delta.features(g))?;
    Ok(masked_cross_entropy(&trace.logits, g.labels(), nodes)?.0)
}

pub fn flatten_objective_grad(objective: &Objective, model: &GcnModel, g: &Graph, delta: &DeltaState, seed: u64) -> Result<(f64, Vec<f64>)> {
    let v = surrogate_value_and_grad(objective, model, g, delta, seed)?;
    let mut flat = v.grads.d_features.into_vec();
    flat.extend_from_slice(&v.grads.d_edge_weights);
    Ok((v.total, flat))
}

/// Cosine between the two gradients; errors when either vanishes.
pub fn gradient_correlation(gc: &[f64], gs: &[f64]) -> Result<f64> {
    let (nc, ns) = (norm(gc), norm(gs));
    if nc == 0.0 || ns == 0.0 || !nc.is_finite() || !ns.is_finite() {
        return Err(GtransError::DegenerateDiagnostic(format!(
            "gradient norms {nc:e} (classification) and {ns:e} (surrogate)"
        )));
    }
    Ok(dot(gc, gs) / (nc * ns))
}

/// Correlation between the classification gradient on `nodes` and the
/// objective gradient at `delta`, then one explicit step of size `epsilon`
/// along the negative objective gradient (no projection). The default
/// `epsilon` is `1e-4·‖∇L_c‖/‖∇L_s‖`. Labels are only read here, never by
/// the optimizer.
pub fn theorem1_diagnostic(
    model: &GcnModel,
    g: &Graph,
    delta: &DeltaState,
    nodes: &[usize],
    objective: &Objective,
    epsilon: Option<f64>,
    seed: u64,
) -> Result<Diagnostic> {
    let (lc_before, gc) = classification_value_and_grad(model, g, delta, nodes)?;
    let (_, gs) = flatten_objective_grad(objective, model, g, delta, seed)?;
    let rho = gradient_correlation(&gc, &gs)?;
    let epsilon = epsilon.unwrap_or(1e-4 * norm(&gc) / norm(&gs));

    let mut stepped = delta.clone();
    let nx = stepped.delta_x.as_slice().len();
    for (x, s) in stepped.delta_x.as_mut_slice().iter_mut().zip(&gs[..nx]) {
        *x -= epsilon * s;
    }
    for (a, s) in stepped.delta_a.iter_mut().zip(&gs[nx..]) {
        *a -= epsilon * s;
    }
    let lc_after = classification_loss(model, g, &stepped, nodes)?;
    Ok(Diagnostic {
        rho,
        epsilon,
        lc_before,
        lc_after,
        descent_verified: lc_after < lc_before,
    })
}
