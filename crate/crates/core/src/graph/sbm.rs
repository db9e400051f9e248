use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{Graph, Split, Topology};
use crate::error::{GtransError, Result};
use crate::linalg::Matrix;
use crate::rng::{seeded, sub_seed};

/// Stochastic block model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmParams {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_shift: f64,
}

/// Sample an SBM graph.
///
/// Block `b` has mean `(shift/√2)·e_b`, so any two block means are exactly
/// `feature_shift` apart; features are unit Gaussians around the mean.
/// Within each block, nodes are split 60/20/20 into train/val/test.
pub fn generate_sbm(params: &SbmParams, seed: u64) -> Result<Graph> {
    let SbmParams {
        blocks,
        nodes_per_block,
        p_in,
        p_out,
        feature_dim,
        feature_shift,
    } = *params;
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(GtransError::Domain(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if blocks == 0 || nodes_per_block == 0 {
        return Err(GtransError::Domain("empty block model".into()));
    }
    if feature_dim < blocks {
        return Err(GtransError::Domain(format!(
            "feature_dim {feature_dim} < {blocks} blocks"
        )));
    }
    if !feature_shift.is_finite() {
        return Err(GtransError::Domain("non-finite feature shift".into()));
    }
    let n = blocks * nodes_per_block;
    let block_of = |i: usize| i / nodes_per_block;

    let mut rng = seeded(sub_seed(seed, "sbm-edges", 0));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block_of(u) == block_of(v) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut rng = seeded(sub_seed(seed, "sbm-features", 0));
    let offset = feature_shift / std::f64::consts::SQRT_2;
    let mut features = Matrix::zeros(n, feature_dim);
    for i in 0..n {
        let row = features.row_mut(i);
        for x in row.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        row[block_of(i)] += offset;
    }

    let mut rng = seeded(sub_seed(seed, "sbm-splits", 0));
    let mut splits = vec![Split::None; n];
    let n_train = (nodes_per_block as f64 * 0.6).round() as usize;
    let n_val = (nodes_per_block as f64 * 0.2).round() as usize;
    for b in 0..blocks {
        let mut members: Vec<usize> = (b * nodes_per_block..(b + 1) * nodes_per_block).collect();
        members.shuffle(&mut rng);
        for (r, &i) in members.iter().enumerate() {
            splits[i] = if r < n_train {
                Split::Train
            } else if r < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    let labels = (0..n).map(block_of).collect();
    let (topology, _) = Topology::new(n, &edges)?;
    Graph::new(topology, features, labels, blocks, splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_homophily;

    fn params(blocks: usize, npb: usize, p_in: f64, p_out: f64) -> SbmParams {
        SbmParams {
            blocks,
            nodes_per_block: npb,
            p_in,
            p_out,
            feature_dim: 4,
            feature_shift: 1.0,
        }
    }

    #[test]
    fn complete_blocks_are_triangles() {
        let g = generate_sbm(&params(2, 3, 1.0, 0.0), 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]);
        assert_eq!(edge_homophily(&g).unwrap(), 1.0);
    }

    #[test]
    fn seeded_determinism() {
        let p = params(3, 20, 0.3, 0.05);
        let a = generate_sbm(&p, 9).unwrap();
        let b = generate_sbm(&p, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.edges(), generate_sbm(&p, 10).unwrap().edges());
    }

    #[test]
    fn within_block_edge_count_within_three_sigma() {
        let g = generate_sbm(&params(2, 100, 0.5, 0.05), 3).unwrap();
        let within = g
            .edges()
            .iter()
            .filter(|&&(u, v)| u / 100 == v / 100)
            .count() as f64;
        let pairs = 2.0 * 100.0 * 99.0 / 2.0;
        let mean = 0.5 * pairs;
        let sd = (pairs * 0.25f64).sqrt();
        assert!((within - mean).abs() <= 3.0 * sd, "{within} vs {mean}±{sd}");
    }

    #[test]
    fn split_proportions_per_block() {
        let g = generate_sbm(&params(2, 50, 0.1, 0.01), 4).unwrap();
        for b in 0..2 {
            let count = |s| (b * 50..(b + 1) * 50).filter(|&i| g.splits()[i] == s).count();
            assert_eq!(count(Split::Train), 30);
            assert_eq!(count(Split::Val), 10);
            assert_eq!(count(Split::Test), 10);
        }
    }

    #[test]
    fn invalid_probabilities_rejected() {
        assert!(generate_sbm(&params(2, 3, 0.1, 0.2), 0).is_err());
        assert!(generate_sbm(&params(2, 3, 1.5, 0.2), 0).is_err());
    }
}
