use std::sync::Arc;

use crate::error::{GtransError, Result};
use crate::gnn::GcnModel;
use crate::graph::{Graph, Topology};
use crate::linalg::Matrix;
use crate::optim::Adam;
use crate::surrogate::{Objective, ObjectiveValue};

use super::projection::project_budget;

/// Free variables of the transformation: an additive feature perturbation
/// and relaxed deletion scores over the existing edges.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaState {
    pub delta_x: Matrix,
    /// One score in `[0,1]` per candidate (existing) edge.
    pub delta_a: Vec<f64>,
    pub candidates: Arc<Topology>,
    pub budget: f64,
}

impl DeltaState {
    pub fn zeros(g: &Graph, budget: f64) -> Self {
        Self {
            delta_x: Matrix::zeros(g.num_nodes(), g.feature_dim()),
            delta_a: vec![0.0; g.num_edges()],
            candidates: g.topology().clone(),
            budget,
        }
    }

    pub fn mass(&self) -> f64 {
        self.delta_a.iter().sum()
    }

    pub fn check_against(&self, g: &Graph) -> Result<()> {
        if !Arc::ptr_eq(&self.candidates, g.topology()) && *self.candidates != **g.topology() {
            return Err(GtransError::Consistency("delta candidates differ from graph edges".into()));
        }
        if self.delta_x.shape() != (g.num_nodes(), g.feature_dim()) {
            return Err(GtransError::Dimension("delta_x shape differs from features".into()));
        }
        Ok(())
    }

    /// Transformed features `X + ΔX`.
    pub fn features(&self, g: &Graph) -> Matrix {
        let mut x = g.features().clone();
        x.add_assign(&self.delta_x);
        x
    }
}

/// Relaxed weights of the transformed adjacency. On an existing edge the
/// flip `A ⊕ ΔA` evaluates to `2 - (1 + δ) = 1 - δ`.
pub fn relaxed_transformed_adjacency(delta: &DeltaState) -> Vec<f64> {
    delta.delta_a.iter().map(|d| 1.0 - d).collect()
}

/// Objective value and gradients w.r.t. `(ΔX, ΔA)` on the relaxed
/// transformed graph.
pub fn surrogate_value_and_grad(
    objective: &Objective,
    model: &GcnModel,
    g: &Graph,
    delta: &DeltaState,
    seed: u64,
) -> Result<ObjectiveValue> {
    delta.check_against(g)?;
    let weights = relaxed_transformed_adjacency(delta);
    let mut val = objective.evaluate(model, g, &weights, &delta.features(g), seed)?;
    // w = 1 - δ
    val.grads.d_edge_weights.iter_mut().for_each(|x| *x = -*x);
    Ok(val)
}

/// `ΔX ← ΔX - η1·Adam(∇)`; features are unconstrained.
pub fn feature_step(delta: &mut DeltaState, grad: &Matrix, eta1: f64, adam: &mut Adam) -> Result<()> {
    if grad.shape() != delta.delta_x.shape() {
        return Err(GtransError::Dimension("feature gradient shape".into()));
    }
    if let Some(i) = grad.as_slice().iter().position(|x| !x.is_finite()) {
        return Err(GtransError::Numerical(format!(
            "non-finite feature gradient at node {}",
            i / grad.cols().max(1)
        )));
    }
    adam.step(delta.delta_x.as_mut_slice(), grad.as_slice(), eta1);
    Ok(())
}

/// `ΔA ← Π(ΔA - η2·Adam(∇))` with the budget projection applied after the
/// Adam step.
pub fn structure_step(delta: &mut DeltaState, grad: &[f64], eta2: f64, adam: &mut Adam) -> Result<()> {
    if grad.len() != delta.delta_a.len() {
        return Err(GtransError::Dimension(format!(
            "{} structure gradients for {} candidates",
            grad.len(),
            delta.delta_a.len()
        )));
    }
    if let Some(e) = grad.iter().position(|x| !x.is_finite()) {
        let (u, v) = delta.candidates.edge(e);
        return Err(GtransError::Numerical(format!(
            "non-finite gradient on edge {e} ({u},{v})"
        )));
    }
    if grad.is_empty() {
        return Ok(());
    }
    let mut stepped = delta.delta_a.clone();
    adam.step(&mut stepped, grad, eta2);
    delta.delta_a = project_budget(&stepped, delta.budget)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::Rng as _;

    use super::*;
    use crate::rng::seeded;
    use crate::testutil::random_graph;

    fn state(m: usize, budget: f64) -> DeltaState {
        let mut rng = seeded(0);
        let g = random_graph(m + 1, 2, 2, &mut rng);
        let mut d = DeltaState::zeros(&g, budget);
        d.delta_a.truncate(m);
        d
    }

    #[test]
    fn relaxed_weights() {
        let mut d = state(3, 1.0);
        assert_eq!(relaxed_transformed_adjacency(&d), vec![1.0; 3]);
        d.delta_a = vec![1.0, 0.25, 0.0];
        assert_eq!(relaxed_transformed_adjacency(&d), vec![0.0, 0.75, 1.0]);
    }

    #[test]
    fn zero_gradient_structure_step_is_noop() {
        let mut d = state(4, 1.0);
        d.delta_a = vec![0.1, 0.2, 0.0, 0.3];
        let before = d.delta_a.clone();
        structure_step(&mut d, &[0.0; 4], 0.1, &mut Adam::new(4)).unwrap();
        assert_eq!(d.delta_a, before);
    }

    #[test]
    fn single_candidate_capped_by_budget() {
        let mut d = state(1, 0.4);
        let mut adam = Adam::new(1);
        for _ in 0..50 {
            structure_step(&mut d, &[-1e3], 0.5, &mut adam).unwrap();
        }
        assert!((d.delta_a[0] - 0.4).abs() < 1e-6);
        let mut d = state(1, 3.0);
        let mut adam = Adam::new(1);
        for _ in 0..50 {
            structure_step(&mut d, &[-1e3], 0.5, &mut adam).unwrap();
        }
        assert_eq!(d.delta_a[0], 1.0);
    }

    #[test]
    fn random_steps_respect_budget() {
        let mut rng = seeded(5);
        for _ in 0..100 {
            let m = rng.random_range(1..40);
            let budget = rng.random_range(0.1..(m as f64));
            let mut d = state(m, budget);
            let mut adam = Adam::new(m);
            for _ in 0..3 {
                let g: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
                structure_step(&mut d, &g, rng.random_range(0.01..1.0), &mut adam).unwrap();
                assert!(d.mass() <= budget + 1e-6);
                assert!(d.delta_a.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }
    }

    #[test]
    fn non_finite_gradient_names_edge() {
        let mut d = state(3, 1.0);
        let err = structure_step(&mut d, &[0.0, f64::NAN, 0.0], 0.1, &mut Adam::new(3)).unwrap_err();
        assert!(err.to_string().contains("edge 1"));
    }

    #[test]
    fn feature_step_cases() {
        let mut d = state(3, 1.0);
        let g = Matrix::from_vec(d.delta_x.rows(), d.delta_x.cols(), vec![0.5; d.delta_x.as_slice().len()]).unwrap();
        let mut adam = Adam::new(g.as_slice().len());
        feature_step(&mut d, &Matrix::zeros(g.rows(), g.cols()), 0.1, &mut adam).unwrap();
        assert!(d.delta_x.as_slice().iter().all(|&x| x == 0.0));
        let mut adam = Adam::new(g.as_slice().len());
        feature_step(&mut d, &g, 0.0, &mut adam).unwrap();
        assert!(d.delta_x.as_slice().iter().all(|&x| x == 0.0));

        // Constant gradient: two Adam steps travel further than one.
        let mut one = state(3, 1.0);
        let mut adam = Adam::new(g.as_slice().len());
        feature_step(&mut one, &g, 0.1, &mut adam).unwrap();
        let mut two = one.clone();
        feature_step(&mut two, &g, 0.1, &mut adam).unwrap();
        assert!(two.delta_x.frobenius_sq() > one.delta_x.frobenius_sq());

        let mut bad = g.clone();
        bad[(0, 0)] = f64::INFINITY;
        assert!(feature_step(&mut d, &bad, 0.1, &mut Adam::new(g.as_slice().len())).is_err());
    }
}
