//! Cyclic coordinate descent for the l1-penalized least-squares objective
//! ||Ax - y||_2^2 + lambda*||x||_1 (no 1/(2m) scaling, so the default
//! lambda = 1e-5 is directly comparable across solvers).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::MeasurementMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    /// l1 penalty.
    pub lambda: f64,
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute coordinate change in a
    /// full sweep.
    pub tol: f64,
    /// Report ||x||_1 of the solution (the constrained-form budget).
    pub tau_report: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-5,
            max_iter: 1000,
            tol: 1e-6,
            tau_report: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoSolution {
    pub x_hat: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    /// ||x_hat||_1, reported when `tau_report` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

/// l_p norm with integer p >= 1.
pub fn lp_norm(x: &[f64], p: u32) -> f64 {
    assert!(p >= 1, "lp_norm requires p >= 1");
    match p {
        1 => x.iter().map(|v| v.abs()).sum(),
        2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        _ => x
            .iter()
            .map(|v| v.abs().powi(p as i32))
            .sum::<f64>()
            .powf(1.0 / p as f64),
    }
}

fn objective(a: &MeasurementMatrix, x: &[f64], y: &[f64], lambda: f64) -> f64 {
    let ax = a.project_slice(x).expect("dimensions checked");
    let residual: f64 = ax.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    residual + lambda * lp_norm(x, 1)
}

/// Soft-threshold operator: argmin_t (t - v)^2*w + lambda*|t| for w = 1 is
/// S(v, lambda/2); here in the scaled form used by the coordinate update.
fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

/// Solves the Lasso by cyclic coordinate descent from a zero warm start.
/// Each coordinate update is the exact one-dimensional minimizer, so the
/// objective never increases. Columns with zero norm are frozen at zero.
pub fn solve(a: &MeasurementMatrix, y_received: &[f64], config: &LassoConfig) -> Result<LassoSolution> {
    if y_received.len() != a.m() {
        return Err(Error::DimensionMismatch {
            expected: a.m(),
            found: y_received.len(),
        });
    }
    if config.lambda < 0.0 || config.tol <= 0.0 {
        return Err(Error::InvalidConfig("need lambda >= 0 and tol > 0".into()));
    }
    if y_received.iter().any(|v| !v.is_finite())
        || a.entries().iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("lasso input".into()));
    }

    let n = a.n();
    let m = a.m();
    let columns: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let col_sq: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect();

    let mut x = vec![0.0; n];
    // residual r = y - Ax, maintained incrementally
    let mut residual = y_received.to_vec();
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..config.max_iter {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = x[j];
            // rho = a_j . (r + a_j * x_j): correlation with the residual
            // excluding coordinate j's own contribution
            let mut rho = 0.0;
            for i in 0..m {
                rho += columns[j][i] * residual[i];
            }
            rho += col_sq[j] * old;
            let new = soft_threshold(rho, config.lambda / 2.0) / col_sq[j];
            if new != old {
                let delta = new - old;
                for i in 0..m {
                    residual[i] -= delta * columns[j][i];
                }
                x[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change <= config.tol {
            converged = true;
            break;
        }
    }

    let objective = objective(a, &x, y_received, config.lambda);
    let tau = config.tau_report.then(|| lp_norm(&x, 1));
    Ok(LassoSolution {
        x_hat: x,
        iterations,
        objective,
        converged,
        tau,
    })
}
