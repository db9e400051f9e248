use crate::error::{GtransError, Result};
use crate::linalg::Matrix;

/// Row-wise softmax with max shifting.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for x in row.iter_mut() {
            *x = (*x - m).exp();
            s += *x;
        }
        for x in row.iter_mut() {
            *x /= s;
        }
    }
    p
}

/// Mean negative log-likelihood over `mask`, and its gradient on the logits.
pub fn masked_cross_entropy(logits: &Matrix, labels: &[usize], mask: &[usize]) -> Result<(f64, Matrix)> {
    if mask.is_empty() {
        return Err(GtransError::Domain("cross entropy over an empty mask".into()));
    }
    let scale = 1.0 / mask.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for &i in mask {
        let row = logits.row(i);
        let y = labels[i];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
        total += lse - row[y];
        let g = grad.row_mut(i);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = scale * ((row[k] - lse).exp() - if k == y { 1.0 } else { 0.0 });
        }
    }
    Ok((total * scale, grad))
}

/// Arg-max class per node (ties resolve to the lowest index).
pub fn predictions(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(logits: &Matrix, labels: &[usize], mask: &[usize]) -> f64 {
    if mask.is_empty() {
        return f64::NAN;
    }
    let pred = predictions(logits);
    let hits = mask.iter().filter(|&&i| pred[i] == labels[i]).count();
    hits as f64 / mask.len() as f64
}
