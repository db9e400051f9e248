//! Loss kernels on representations and logits, each with analytic gradients.

use rand::Rng as _;

use crate::error::{GtransError, Result};
use crate::gnn::softmax_rows;
use crate::graph::Topology;
use crate::linalg::{dot, norm, Matrix};
use crate::rng::seeded;

/// `cos(a, b)` together with its gradients w.r.t. `a` and `b`.
fn cosine_with_grads(a: &[f64], b: &[f64], row: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 {
        return Err(GtransError::DegenerateRepresentation { row });
    }
    if nb == 0.0 {
        return Err(GtransError::DegenerateRepresentation { row });
    }
    let c = dot(a, b) / (na * nb);
    let ga = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| bi / (na * nb) - c * ai / (na * na))
        .collect();
    let gb = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| ai / (na * nb) - c * bi / (nb * nb))
        .collect();
    Ok((c, ga, gb))
}

/// Sum of `1 - cos(ẑ_i, z_i)` over rows, with gradients on `z` and `z_hat`.
pub fn alignment_loss(z: &Matrix, z_hat: &Matrix) -> Result<(f64, Matrix, Matrix)> {
    check_same_shape(z, z_hat)?;
    let mut loss = 0.0;
    let mut dz = Matrix::zeros(z.rows(), z.cols());
    let mut dz_hat = Matrix::zeros(z.rows(), z.cols());
    for i in 0..z.rows() {
        let (c, g_hat, g_z) = cosine_with_grads(z_hat.row(i), z.row(i), i)?;
        loss += 1.0 - c;
        for (d, g) in dz.row_mut(i).iter_mut().zip(g_z) {
            *d = -g;
        }
        for (d, g) in dz_hat.row_mut(i).iter_mut().zip(g_hat) {
            *d = -g;
        }
    }
    Ok((loss, dz, dz_hat))
}

fn check_same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(GtransError::Dimension(format!(
            "representations {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Parameter-free contrastive loss
/// `Σ_i (1 - cos(ẑ_i, z_i)) - Σ_i (1 - cos(z̃_i, z_i))`
/// with gradients on `(z, z_hat, z_tilde)`.
pub fn contrastive_loss(z: &Matrix, z_hat: &Matrix, z_tilde: &Matrix) -> Result<(f64, Matrix, Matrix, Matrix)> {
    check_same_shape(z, z_tilde)?;
    let (pos, mut dz, dz_hat) = alignment_loss(z, z_hat)?;
    let (neg, dz_neg, dz_tilde_neg) = alignment_loss(z, z_tilde)?;
    dz.add_scaled(&dz_neg, -1.0);
    let mut dz_tilde = dz_tilde_neg;
    dz_tilde.scale(-1.0);
    Ok((pos - neg, dz, dz_hat, dz_tilde))
}

/// Mean prediction entropy over `mask`, with its gradient on the logits.
pub fn entropy_loss(logits: &Matrix, mask: &[usize]) -> Result<(f64, Matrix)> {
    if mask.is_empty() {
        return Err(GtransError::Domain("entropy over an empty mask".into()));
    }
    let p = softmax_rows(logits);
    let scale = 1.0 / mask.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for &i in mask {
        let pi = p.row(i);
        let logp: Vec<f64> = pi.iter().map(|&x| if x > 0.0 { x.ln() } else { f64::MIN_POSITIVE.ln() }).collect();
        let h: f64 = -pi.iter().zip(&logp).map(|(a, b)| a * b).sum::<f64>();
        total += h;
        for ((g, &pk), &lk) in grad.row_mut(i).iter_mut().zip(pi).zip(&logp) {
            *g = -scale * pk * (lk + h);
        }
    }
    Ok((total * scale, grad))
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross entropy of `σ(z_u·z_v)`: positives labelled 1,
/// negatives labelled 0. Returns the gradient on `z`.
pub fn reconstruction_loss(
    z: &Matrix,
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
) -> Result<(f64, Matrix)> {
    let pairs = positives.len() + negatives.len();
    if pairs == 0 {
        return Err(GtransError::Domain("reconstruction with no pairs".into()));
    }
    let scale = 1.0 / pairs as f64;
    let mut grad = Matrix::zeros(z.rows(), z.cols());
    let mut total = 0.0;
    for (list, target) in [(positives, 1.0), (negatives, 0.0)] {
        for &(u, v) in list {
            let s = dot(z.row(u), z.row(v));
            total -= if target == 1.0 { log_sigmoid(s) } else { log_sigmoid(-s) };
            let coef = scale * (sigmoid(s) - target);
            let (zu, zv) = (z.row(u).to_vec(), z.row(v).to_vec());
            for (g, x) in grad.row_mut(u).iter_mut().zip(&zv) {
                *g += coef * x;
            }
            for (g, x) in grad.row_mut(v).iter_mut().zip(&zu) {
                *g += coef * x;
            }
        }
    }
    Ok((total * scale, grad))
}

/// Uniformly sample `count` distinct non-edges (no self-pairs).
pub fn sample_non_edges(topology: &Topology, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let n = topology.num_nodes();
    let max_pairs = n * n.saturating_sub(1) / 2;
    if count + topology.num_edges() > max_pairs {
        return Err(GtransError::Sampling(format!(
            "{count} non-edges requested but only {} exist",
            max_pairs.saturating_sub(topology.num_edges())
        )));
    }
    let mut rng = seeded(seed);
    let mut seen = std::collections::HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let max_tries = 100 * count.max(1) + 1000;
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > max_tries {
            return Err(GtransError::Sampling(format!(
                "found {} of {count} non-edges after {max_tries} draws",
                out.len()
            )));
        }
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if topology.has_edge(key.0, key.1) || !seen.insert(key) {
            continue;
        }
        out.push(key);
    }
    Ok(out)
}
