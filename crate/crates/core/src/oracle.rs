//! Independent reference computations used to certify the fast paths.

use crate::metrics::{auc_from_doubled_count, ScoredPair};

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance of a gradient check.
pub const GRAD_REL_TOL: f64 = 1e-6;
/// Absolute floor of a gradient check.
pub const GRAD_ABS_FLOOR: f64 = 1e-9;

/// `(f(x + h e_i) − f(x − h e_i)) / 2h` for every coordinate.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest violation ratio `|a − n| / max(rel · max(|a|, |n|), floor)`;
/// the check passes when this is ≤ 1.
pub fn gradient_error_ratio(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let allowed = (GRAD_REL_TOL * a.abs().max(n.abs())).max(GRAD_ABS_FLOOR);
            (a - n).abs() / allowed
        })
        .fold(0.0, f64::max)
}

/// AUC by explicit enumeration of all n² chosen/rejected cross pairs.
pub fn brute_force_auc(pairs: &[ScoredPair]) -> f64 {
    let mut doubled: u128 = 0;
    for c in pairs {
        for r in pairs {
            if c.chosen_score > r.rejected_score {
                doubled += 2;
            } else if c.chosen_score == r.rejected_score {
                doubled += 1;
            }
        }
    }
    auc_from_doubled_count(doubled, pairs.len())
}
