//! Bayesian ridge regression with evidence maximization.
//!
//! Weights get a zero-mean Gaussian prior with precision `lambda`, targets
//! Gaussian noise with precision `beta`. On centered data the posterior mean
//! is `w = (lambda/beta * I + X'X)^-1 X'y`. Both precisions are re-estimated
//! with MacKay's fixed-point updates,
//!
//! ```text
//! gamma  = sum_i beta*e_i / (beta*e_i + lambda)     (e_i: eigenvalues of X'X)
//! lambda = (gamma + 2a) / (|w|^2 + 2b)
//! beta   = (n - gamma + 2a) / (|y - Xw|^2 + 2b)
//! ```
//!
//! with vague Gamma hyperpriors `a = b = 1e-6` keeping both updates finite on
//! noiseless or all-zero-weight data. One eigendecomposition of `X'X` serves
//! every update.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::RegressorError;

const HYPER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeParams {
    pub max_updates: usize,
    pub tolerance: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self {
            max_updates: 300,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianRidgeModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Weight-prior precision.
    pub lambda: f64,
    /// Noise precision.
    pub beta: f64,
    pub updates: usize,
    pub converged: bool,
    /// Set when a zero-eigenvalue direction was dropped (pseudo-inverse).
    pub singular: bool,
}

impl BayesianRidgeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Centered design, its Gram eigendecomposition and the projected targets.
struct Centered {
    n: usize,
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    projected: DVector<f64>,
}

impl Centered {
    fn new(x: &[f64], width: usize, y: &[f64]) -> Result<Self, RegressorError> {
        let n = y.len();
        if width == 0 {
            return Err(RegressorError::DimensionMismatch { expected: 1, found: 0 });
        }
        if x.len() != n * width {
            return Err(RegressorError::DimensionMismatch {
                expected: n * width,
                found: x.len(),
            });
        }
        if n < 2 {
            return Err(RegressorError::TooFewRows { required: 2, found: n });
        }
        let mut x_mean = vec![0.0; width];
        for row in x.chunks_exact(width) {
            for (m, v) in x_mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        x_mean.iter_mut().for_each(|m| *m /= n as f64);
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let xc = DMatrix::from_fn(n, width, |i, j| x[i * width + j] - x_mean[j]);
        let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
        let gram = xc.transpose() * &xc;
        let eig = SymmetricEigen::new(gram);
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|e| e.max(0.0)).collect();
        let projected = eig.eigenvectors.transpose() * (xc.transpose() * &yc);
        Ok(Self {
            n,
            x: xc,
            y: yc,
            x_mean,
            y_mean,
            eigenvalues,
            eigenvectors: eig.eigenvectors,
            projected,
        })
    }

    /// `w = V diag(1 / (e_i + ratio)) V' X'y`; near-zero pivots are dropped.
    fn solve(&self, ratio: f64) -> (DVector<f64>, bool) {
        let scale = self.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b)).max(1.0);
        let mut singular = false;
        let coords = DVector::from_fn(self.eigenvalues.len(), |i, _| {
            let pivot = self.eigenvalues[i] + ratio;
            if pivot <= scale * 1e-14 {
                singular = true;
                0.0
            } else {
                self.projected[i] / pivot
            }
        });
        (&self.eigenvectors * coords, singular)
    }

    fn model(&self, w: &DVector<f64>, lambda: f64, beta: f64, updates: usize, converged: bool, singular: bool) -> BayesianRidgeModel {
        let coef: Vec<f64> = w.iter().copied().collect();
        let intercept = self.y_mean - coef.iter().zip(&self.x_mean).map(|(a, b)| a * b).sum::<f64>();
        BayesianRidgeModel {
            coef,
            intercept,
            lambda,
            beta,
            updates,
            converged,
            singular,
        }
    }
}

/// Fit with evidence maximization. `x` is row-major with `width` columns.
pub fn fit_bayesian_ridge(
    x: &[f64],
    width: usize,
    y: &[f64],
    params: &RidgeParams,
) -> Result<BayesianRidgeModel, RegressorError> {
    if params.max_updates == 0 || params.tolerance.is_nan() || params.tolerance <= 0.0 {
        return Err(RegressorError::InvalidHyperparameter(format!("{params:?}")));
    }
    let c = Centered::new(x, width, y)?;
    let n = c.n as f64;
    let variance = c.y.norm_squared() / n;
    let mut beta = 1.0 / (variance + f64::EPSILON);
    let mut lambda = 1.0;
    let mut previous: Option<DVector<f64>> = None;
    let mut updates = 0;
    let mut converged = false;

    while updates < params.max_updates {
        let (w, _) = c.solve(lambda / beta);
        let gamma: f64 = c
            .eigenvalues
            .iter()
            .map(|&e| beta * e / (beta * e + lambda))
            .sum();
        let rss = (&c.y - &c.x * &w).norm_squared();
        lambda = (gamma + 2.0 * HYPER) / (w.norm_squared() + 2.0 * HYPER);
        beta = (n - gamma + 2.0 * HYPER) / (rss + 2.0 * HYPER);
        updates += 1;
        if let Some(prev) = &previous {
            if (&w - prev).amax() < params.tolerance {
                converged = true;
                break;
            }
        }
        previous = Some(w);
    }
    let (w, singular) = c.solve(lambda / beta);
    Ok(c.model(&w, lambda, beta, updates, converged, singular))
}

/// Posterior-mean weights for frozen precisions, no evidence updates.
pub fn fit_bayesian_ridge_fixed(
    x: &[f64],
    width: usize,
    y: &[f64],
    lambda: f64,
    beta: f64,
) -> Result<BayesianRidgeModel, RegressorError> {
    if !(lambda >= 0.0 && beta > 0.0) {
        return Err(RegressorError::InvalidHyperparameter(format!(
            "lambda {lambda}, beta {beta}"
        )));
    }
    let c = Centered::new(x, width, y)?;
    let (w, singular) = c.solve(lambda / beta);
    Ok(c.model(&w, lambda, beta, 0, true, singular))
}
