//! Representation-space probes of the contrastive objective: the alignment
//! term alone compacts classes (and can collapse them), the negative term
//! keeps classes apart.
//!
//! Representations are optimized directly. Each step draws a fresh positive
//! partner per node (same class with probability `view_purity`) and a fresh
//! random permutation for negatives.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use super::losses::{alignment_loss, contrastive_loss};
use crate::error::{GtransError, Result};
use crate::linalg::{norm, Matrix};
use crate::rng::{seeded, sub_seed};

pub fn normalize_rows(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for i in 0..out.rows() {
        let r = out.row_mut(i);
        let n = norm(r);
        if n > 0.0 {
            r.iter_mut().for_each(|x| *x /= n);
        }
    }
    out
}

fn class_centers(zn: &Matrix, labels: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let mut centers = Matrix::zeros(k, zn.cols());
    let mut counts = vec![0usize; k];
    for (i, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        for (c, &x) in centers.row_mut(y).iter_mut().zip(zn.row(i)) {
            *c += x;
        }
    }
    for (y, &c) in counts.iter().enumerate() {
        if c > 0 {
            centers.row_mut(y).iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    (centers, counts)
}

/// Mean over classes of the mean squared distance of row-normalized
/// representations to their class center.
pub fn within_class_variance(z: &Matrix, labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let zn = normalize_rows(z);
    let (centers, counts) = class_centers(&zn, labels, k);
    let mut per_class = vec![0.0; k];
    for (i, &y) in labels.iter().enumerate() {
        per_class[y] += zn
            .row(i)
            .iter()
            .zip(centers.row(y))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    let present: Vec<f64> = per_class
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| s / c as f64)
        .collect();
    present.iter().sum::<f64>() / present.len() as f64
}

/// Distance between the centers of classes `a` and `b` of row-normalized
/// representations.
pub fn center_distance(z: &Matrix, labels: &[usize], a: usize, b: usize) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1).max(a.max(b) + 1);
    let (centers, _) = class_centers(&normalize_rows(z), labels, k);
    centers
        .row(a)
        .iter()
        .zip(centers.row(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone)]
pub struct DescentConfig {
    pub steps: usize,
    pub lr: f64,
    /// Probability that a node's positive partner shares its class.
    pub view_purity: f64,
    /// Include the negative (second) term of the contrastive loss.
    pub two_term: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct DescentTrace {
    pub loss: Vec<f64>,
    /// Recorded before the first step and after every step.
    pub within_variance: Vec<f64>,
    pub center_distance: Vec<f64>,
}

fn positive_partners(labels: &[usize], purity: f64, rng: &mut crate::rng::Rng) -> Result<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let same = rng.random::<f64>() < purity;
            let pool: Vec<usize> = if same {
                by_class[y].iter().copied().filter(|&j| j != i).collect()
            } else {
                (0..labels.len()).filter(|&j| labels[j] != y).collect()
            };
            pool.choose(rng)
                .copied()
                .ok_or_else(|| GtransError::Domain(format!("no partner for node {i}")))
        })
        .collect()
}

/// Gradient descent on the alignment term (or the full two-term loss)
/// directly over the representation matrix, for two-class data.
pub fn descend(z0: &Matrix, labels: &[usize], cfg: &DescentConfig) -> Result<DescentTrace> {
    if labels.len() != z0.rows() {
        return Err(GtransError::Dimension("one label per representation row".into()));
    }
    let mut z = z0.clone();
    let mut trace = DescentTrace::default();
    trace.within_variance.push(within_class_variance(&z, labels));
    trace.center_distance.push(center_distance(&z, labels, 0, 1));
    for step in 0..cfg.steps {
        let mut rng = seeded(sub_seed(cfg.seed, "compactness", step as u64));
        let partners = positive_partners(labels, cfg.view_purity, &mut rng)?;
        let z_hat = z.gather_rows(&partners);
        let mut grad;
        let loss;
        let scatter = |grad: &mut Matrix, d: &Matrix, idx: &[usize]| {
            for (i, &p) in idx.iter().enumerate() {
                for (g, &x) in grad.row_mut(p).iter_mut().zip(d.row(i)) {
                    *g += x;
                }
            }
        };
        if cfg.two_term {
            let mut perm: Vec<usize> = (0..z.rows()).collect();
            perm.shuffle(&mut rng);
            let z_tilde = z.gather_rows(&perm);
            let (l, dz, dz_hat, dz_tilde) = contrastive_loss(&z, &z_hat, &z_tilde)?;
            grad = dz;
            scatter(&mut grad, &dz_hat, &partners);
            scatter(&mut grad, &dz_tilde, &perm);
            loss = l;
        } else {
            let (l, dz, dz_hat) = alignment_loss(&z, &z_hat)?;
            grad = dz;
            scatter(&mut grad, &dz_hat, &partners);
            loss = l;
        }
        z.add_scaled(&grad, -cfg.lr);
        trace.loss.push(loss);
        trace.within_variance.push(within_class_variance(&z, labels));
        trace.center_distance.push(center_distance(&z, labels, 0, 1));
    }
    Ok(trace)
}

/// Two Gaussian clusters around random unit directions, for probes.
pub fn two_class_representations(per_class: usize, dim: usize, spread: f64, seed: u64) -> (Matrix, Vec<usize>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = seeded(seed);
    let center = |rng: &mut crate::rng::Rng| {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let centers = [center(&mut rng), center(&mut rng)];
    let mut z = Matrix::zeros(2 * per_class, dim);
    let mut labels = Vec::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let y = i / per_class;
        labels.push(y);
        for (x, &c) in z.row_mut(i).iter_mut().zip(&centers[y]) {
            let e: f64 = StandardNormal.sample(&mut rng);
            *x = c + spread * e;
        }
    }
    (z, labels)
}

/// Trailing moving average with window `w` (length `len - w + 1`).
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    xs.windows(w).map(|s| s.iter().sum::<f64>() / w as f64).collect()
}
