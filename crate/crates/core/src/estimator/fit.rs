use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Minimum number of distinct angles for a fit.
pub const MIN_POINTS: usize = 5;

/// Values sampled at rotation angles θ with their variances.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveData {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub variances: Vec<f64>,
}

impl CurveData {
    /// Equal weights; for noiseless curves.
    pub fn unweighted(thetas: &[f64], values: &[f64]) -> Self {
        Self {
            thetas: thetas.to_vec(),
            values: values.to_vec(),
            variances: vec![1.0; thetas.len()],
        }
    }

    /// Probabilities estimated from `n` shots each, variance p(1−p)/n, or
    /// 1/(4n) where p is 0 or 1.
    pub fn binomial(thetas: &[f64], probs: &[f64], n: u64) -> Self {
        let n = n as f64;
        let variances = probs.iter().map(|&p| binomial_variance(p, n)).collect();
        Self {
            thetas: thetas.to_vec(),
            values: probs.to_vec(),
            variances,
        }
    }

    /// Parity Π = 2q − 1 with q the probability of equal bits.
    pub fn parity(thetas: &[f64], parity: &[f64], n: u64) -> Self {
        let n = n as f64;
        let variances = parity
            .iter()
            .map(|&pi| 4.0 * binomial_variance((1.0 + pi) / 2.0, n))
            .collect();
        Self {
            thetas: thetas.to_vec(),
            values: parity.to_vec(),
            variances,
        }
    }
}

fn binomial_variance(p: f64, n: f64) -> f64 {
    let v = p * (1.0 - p) / n;
    if v > 0.0 {
        v
    } else {
        0.25 / n
    }
}

/// `y0 + a cos θ + b cos 2θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub y0: f64,
    pub a: f64,
    pub b: f64,
    /// Root-mean-square of the unweighted residuals.
    pub residual_rms: f64,
    /// Covariance of (y0, a, b) from the weighted normal equations.
    pub covariance: [[f64; 3]; 3],
}

impl CosineFit {
    pub fn eval(&self, theta: f64) -> f64 {
        self.y0 + self.a * theta.cos() + self.b * (2.0 * theta).cos()
    }
}

fn basis(theta: f64) -> Vector3<f64> {
    Vector3::new(1.0, theta.cos(), (2.0 * theta).cos())
}

/// Weighted least squares in the basis {1, cos θ, cos 2θ}.
pub fn fit_cosine_series(curve: &CurveData) -> Result<CosineFit> {
    let n = curve.thetas.len();
    if curve.values.len() != n || curve.variances.len() != n {
        return Err(Error::input("curve columns have different lengths"));
    }
    if curve.variances.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::input("variances must be positive"));
    }
    let mut sorted = curve.thetas.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if sorted.len() < MIN_POINTS {
        return Err(Error::Fit(format!(
            "need at least {MIN_POINTS} distinct angles, got {}",
            sorted.len()
        )));
    }
    let span = sorted[sorted.len() - 1] - sorted[0];
    if span < 2.0 * PI - 1e-9 {
        return Err(Error::Fit(format!(
            "angles span {span:.4} rad, less than one period"
        )));
    }

    let mut xtwx = Matrix3::zeros();
    let mut xtwy = Vector3::zeros();
    for ((&t, &y), &v) in curve.thetas.iter().zip(&curve.values).zip(&curve.variances) {
        let x = basis(t);
        xtwx += x * x.transpose() / v;
        xtwy += x * y / v;
    }
    let eig = SymmetricEigen::new(xtwx);
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
            (lo.min(e), hi.max(e.abs()))
        });
    if !(lo > 1e-12 * hi) {
        return Err(Error::Fit("design matrix is rank deficient".into()));
    }
    let cov = eig.eigenvectors
        * Matrix3::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e))
        * eig.eigenvectors.transpose();
    let coef = cov * xtwy;
    let rss: f64 = curve
        .thetas
        .iter()
        .zip(&curve.values)
        .map(|(&t, &y)| (y - basis(t).dot(&coef)).powi(2))
        .sum();
    Ok(CosineFit {
        y0: coef[0],
        a: coef[1],
        b: coef[2],
        residual_rms: (rss / n as f64).sqrt(),
        covariance: std::array::from_fn(|i| {
            std::array::from_fn(|j| 0.5 * (cov[(i, j)] + cov[(j, i)]))
        }),
    })
}
