use crate::error::{GtransError, Result};

const SUM_TOL: f64 = 1e-7;
const MAX_ITERS: usize = 200;

fn clamped_sum(p: &[f64], gamma: f64) -> f64 {
    p.iter().map(|&x| (x - gamma).clamp(0.0, 1.0)).sum()
}

/// Project onto `{x ∈ [0,1]^n : Σx ≤ budget}`.
///
/// If clamping alone satisfies the budget it is returned; otherwise the
/// shift `γ` with `Σ clamp(p - γ, 0, 1) = budget` is found by bisection over
/// `[min(p) - 1, max(p)]`. The result is taken from the feasible side, so
/// the sum never exceeds the budget and falls short by at most 1e-7.
pub fn project_budget(p: &[f64], budget: f64) -> Result<Vec<f64>> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(GtransError::Domain(format!("budget {budget} must be positive")));
    }
    if let Some(i) = p.iter().position(|x| !x.is_finite()) {
        return Err(GtransError::Numerical(format!("non-finite entry at {i}")));
    }
    let clamped: Vec<f64> = p.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    if clamped.iter().sum::<f64>() <= budget {
        return Ok(clamped);
    }
    let lo0 = p.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // f(γ) is non-increasing: f(lo) = n > budget, f(hi) = 0 < budget.
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = clamped_sum(p, mid);
        if s > budget {
            lo = mid;
        } else {
            hi = mid;
            if budget - s <= SUM_TOL {
                return Ok(p.iter().map(|&x| (x - hi).clamp(0.0, 1.0)).collect());
            }
        }
    }
    let s = clamped_sum(p, hi);
    if s <= budget && budget - s <= 1e-6 {
        return Ok(p.iter().map(|&x| (x - hi).clamp(0.0, 1.0)).collect());
    }
    Err(GtransError::Numerical(format!(
        "bisection did not converge: sum {s} vs budget {budget}"
    )))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn inactive_constraint() {
        assert_eq!(project_budget(&[0.3, 0.2], 1.0).unwrap(), vec![0.3, 0.2]);
    }

    #[test]
    fn analytic_shift() {
        // 3·(0.9 - γ) = 1.5 → γ = 0.4
        let out = project_budget(&[0.9, 0.9, 0.9], 1.5).unwrap();
        for x in out {
            assert!((x - 0.5).abs() < 1e-7);
        }
    }

    #[test]
    fn clamp_only() {
        assert_eq!(project_budget(&[1.5, -0.2, 0.4], 10.0).unwrap(), vec![1.0, 0.0, 0.4]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(project_budget(&[0.5], 0.0).is_err());
        assert!(project_budget(&[f64::NAN], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn feasible_tight_and_idempotent(
            p in prop::collection::vec(-2.0..3.0f64, 1..300),
            frac in 0.01..1.5f64,
        ) {
            let budget = frac * p.len() as f64 * 0.5 + 1e-3;
            let q = project_budget(&p, budget).unwrap();
            prop_assert!(q.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let s: f64 = q.iter().sum();
            prop_assert!(s <= budget + 1e-6);
            let clamp_sum: f64 = p.iter().map(|x| x.clamp(0.0, 1.0)).sum();
            if clamp_sum > budget {
                prop_assert!((s - budget).abs() <= 1e-6);
            }
            let qq = project_budget(&q, budget).unwrap();
            for (a, b) in q.iter().zip(&qq) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
