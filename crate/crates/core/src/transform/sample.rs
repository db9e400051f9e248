use std::thread;

use rand::Rng as _;

use crate::error::{GtransError, Result};
use crate::graph::Graph;
use crate::rng::{seeded, sub_seed};

use super::delta::DeltaState;

/// Outcome of the K-trial discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub graph: Graph,
    pub chosen: usize,
    pub losses: Vec<f64>,
    /// Candidate edge ids deleted in the chosen trial.
    pub deleted: Vec<usize>,
}

/// Keep mask of one Bernoulli trial: edge `e` is deleted with probability
/// `delta_a[e]`.
pub fn bernoulli_keep(delta_a: &[f64], seed: u64) -> Vec<bool> {
    let mut rng = seeded(seed);
    delta_a.iter().map(|&p| rng.random::<f64>() >= p).collect()
}

/// Draw `k` discrete graphs from the relaxed deletions and keep the one
/// with the smallest `eval_loss`. `eval_loss` receives 0/1 weights over the
/// candidate edges. Trials run in parallel; ties go to the lowest index.
pub fn sample_discrete(
    g: &Graph,
    delta: &DeltaState,
    k: usize,
    eval_loss: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    seed: u64,
) -> Result<Discretized> {
    if k == 0 {
        return Err(GtransError::Config("sample count must be at least 1".into()));
    }
    delta.check_against(g)?;
    let masks: Vec<Vec<bool>> = (0..k)
        .map(|t| bernoulli_keep(&delta.delta_a, sub_seed(seed, "bernoulli", t as u64)))
        .collect();
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(k);
    let chunk = k.div_ceil(workers);
    let losses: Vec<Result<f64>> = thread::scope(|s| {
        let handles: Vec<_> = masks
            .chunks(chunk)
            .map(|ms| {
                s.spawn(move || {
                    ms.iter()
                        .map(|m| {
                            let w: Vec<f64> = m.iter().map(|&keep| if keep { 1.0 } else { 0.0 }).collect();
                            eval_loss(&w)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sampling worker panicked"))
            .collect()
    });
    let losses = losses.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut chosen = 0;
    for (t, &l) in losses.iter().enumerate() {
        if l < losses[chosen] {
            chosen = t;
        }
    }
    let keep = &masks[chosen];
    let deleted = (0..keep.len()).filter(|&e| !keep[e]).collect();
    let topo = delta.candidates.filter(|e| keep[e]);
    let graph = g.with_topology(topo)?.with_features(delta.features(g))?;
    Ok(Discretized {
        graph,
        chosen,
        losses,
        deleted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Split, Topology};
    use crate::linalg::Matrix;

    fn ring(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let (t, _) = Topology::new(n, &edges).unwrap();
        Graph::new(t, Matrix::zeros(n, 1), vec![0; n], 1, vec![Split::Test; n]).unwrap()
    }

    #[test]
    fn zero_delta_keeps_graph() {
        let g = ring(6);
        let d = DeltaState::zeros(&g, 1.0);
        let out = sample_discrete(&g, &d, 5, &|w| Ok(w.iter().sum()), 3).unwrap();
        assert_eq!(out.graph, g);
        assert!(out.losses.iter().all(|&l| l == 6.0));
        assert_eq!(out.chosen, 0);
    }

    #[test]
    fn full_delta_always_deletes() {
        let g = ring(6);
        let mut d = DeltaState::zeros(&g, 1.0);
        d.delta_a[2] = 1.0;
        for seed in 0..10 {
            let out = sample_discrete(&g, &d, 3, &|_| Ok(0.0), seed).unwrap();
            assert_eq!(out.graph.num_edges(), 5);
            assert_eq!(out.deleted, vec![2]);
        }
    }

    #[test]
    fn binomial_deletion_count() {
        let g = ring(1000);
        let mut d = DeltaState::zeros(&g, 1000.0);
        d.delta_a.iter_mut().for_each(|x| *x = 0.5);
        let out = sample_discrete(&g, &d, 1, &|_| Ok(0.0), 11).unwrap();
        // sigma = sqrt(1000 * 0.25)
        let sigma = 250f64.sqrt();
        assert!((out.deleted.len() as f64 - 500.0).abs() <= 3.0 * sigma);
    }

    #[test]
    fn picks_minimum_and_is_deterministic() {
        let g = ring(30);
        let mut d = DeltaState::zeros(&g, 30.0);
        d.delta_a.iter_mut().for_each(|x| *x = 0.3);
        let f = |w: &[f64]| Ok(w.iter().enumerate().map(|(i, x)| x * (i % 7) as f64).sum());
        let a = sample_discrete(&g, &d, 16, &f, 4).unwrap();
        let b = sample_discrete(&g, &d, 16, &f, 4).unwrap();
        assert_eq!(a, b);
        let min = a.losses.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(a.losses[a.chosen], min);
    }

    #[test]
    fn eval_errors_propagate() {
        let g = ring(4);
        let d = DeltaState::zeros(&g, 1.0);
        let r = sample_discrete(&g, &d, 4, &|_| Err(GtransError::Numerical("boom".into())), 0);
        assert!(r.is_err());
    }
}
