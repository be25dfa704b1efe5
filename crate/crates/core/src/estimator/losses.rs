use serde::{Deserialize, Serialize};

use crate::measure::{JointCounts, ShotDataset};
use crate::rotation::ObservablePoint;
use crate::{Error, Result};

/// Largest tolerated grid average of cos θ or cos 2θ.
pub const BIAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub l_a: f64,
    pub l_b: f64,
    pub l_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Trapezoid weights over the sorted grid, normalized to sum to one.
///
/// On a uniform grid spanning whole periods this is the exact period
/// average of any low-order cosine series.
pub fn grid_weights(thetas: &[f64]) -> Vec<f64> {
    let n = thetas.len();
    if n < 2 {
        return vec![1.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| thetas[i].total_cmp(&thetas[j]));
    let span = thetas[order[n - 1]] - thetas[order[0]];
    if span <= 0.0 {
        return vec![1.0 / n as f64; n];
    }
    let mut w = vec![0.0; n];
    for k in 0..n {
        let lo = thetas[order[k.saturating_sub(1)]];
        let hi = thetas[order[(k + 1).min(n - 1)]];
        w[order[k]] = (hi - lo) / (2.0 * span);
    }
    w
}

fn bias_warning(thetas: &[f64], w: &[f64]) -> Option<String> {
    let c1: f64 = thetas.iter().zip(w).map(|(t, w)| w * t.cos()).sum();
    let c2: f64 = thetas.iter().zip(w).map(|(t, w)| w * (2.0 * t).cos()).sum();
    (c1.abs() > BIAS_TOL || c2.abs() > BIAS_TOL).then(|| {
        format!("grid does not cover whole periods (mean cos θ = {c1:.3e}, mean cos 2θ = {c2:.3e}); losses are biased")
    })
}

pub(crate) fn losses_from_counts(thetas: &[f64], counts: &[JointCounts]) -> Result<LossEstimate> {
    if thetas.is_empty() || thetas.len() != counts.len() {
        return Err(Error::input("losses need one count row per angle"));
    }
    let w = grid_weights(thetas);
    let (mut mean_a, mut mean_b) = (0.0, 0.0);
    for ((&t, c), w) in thetas.iter().zip(counts).zip(&w) {
        let p: ObservablePoint = c.point(t);
        mean_a += w * p.p_a;
        mean_b += w * p.p_b;
    }
    let l_a = 1.0 - 2.0 * mean_a;
    let l_b = 1.0 - 2.0 * mean_b;
    Ok(LossEstimate {
        l_a,
        l_b,
        l_total: l_a + l_b - l_a * l_b,
        warning: bias_warning(thetas, &w),
    })
}

/// Per-atom and total loss from the angle-averaged single-atom curves.
pub fn extract_losses(dataset: &ShotDataset) -> Result<LossEstimate> {
    losses_from_counts(&dataset.theta_grid, &dataset.counts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::{default_grid, linear_grid};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn default_grid_is_unbiased() {
        let g = default_grid();
        let w = grid_weights(&g);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], w[40], epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 2.0 * w[0], epsilon = 1e-15);
        assert!(bias_warning(&g, &w).is_none());
    }

    #[test]
    fn partial_period_warns() {
        let g = linear_grid(0.0, 1.5 * PI, 20);
        assert!(bias_warning(&g, &grid_weights(&g)).is_some());
    }

    #[test]
    fn weights_follow_sorted_order() {
        let w = grid_weights(&[2.0 * PI, 0.0, PI]);
        assert_eq!(w, vec![0.25, 0.25, 0.5]);
    }
}
