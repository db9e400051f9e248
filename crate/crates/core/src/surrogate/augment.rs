use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{GtransError, Result};
use crate::linalg::Matrix;
use crate::rng::seeded;

/// Keep-mask for DropEdge: each edge survives independently with
/// probability `1 - drop_ratio`.
pub fn dropedge_mask(num_edges: usize, drop_ratio: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&drop_ratio) {
        return Err(GtransError::Domain(format!("drop ratio {drop_ratio} outside [0,1)")));
    }
    let mut rng = seeded(seed);
    Ok((0..num_edges).map(|_| rng.random::<f64>() >= drop_ratio).collect())
}

pub fn dropedge(edges: &[(u32, u32)], drop_ratio: f64, seed: u64) -> Result<Vec<(u32, u32)>> {
    let keep = dropedge_mask(edges.len(), drop_ratio, seed)?;
    Ok(edges
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(&e, _)| e)
        .collect())
}

/// Row-shuffled features and the permutation used: `out[i] = x[perm[i]]`.
pub fn shuffle_negatives(x: &Matrix, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    if x.rows() < 2 {
        return Err(GtransError::Domain(format!(
            "shuffling needs at least 2 nodes, got {}",
            x.rows()
        )));
    }
    let mut perm: Vec<usize> = (0..x.rows()).collect();
    perm.shuffle(&mut seeded(seed));
    Ok((x.gather_rows(&perm), perm))
}
