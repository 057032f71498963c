use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textfeat::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Stop once no coefficient moves by more than this in a sweep.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tolerance: 1e-7, max_iterations: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoLogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations_used: usize,
    /// Penalised objective at the start and after every sweep.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl LassoLogisticModel {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(row))
    }

    pub fn nonzero(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b != 0.0).count()
    }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Mean negative log-likelihood plus `lambda * |beta|_1`; the intercept is
/// not penalised.
pub fn penalized_objective(x: &FeatureMatrix, y: &[bool], intercept: f64, coefficients: &[f64], lambda: f64) -> f64 {
    let n = x.n_rows() as f64;
    let loss: f64 = x
        .rows()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = intercept + row.iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>();
            softplus(eta) - if yi { eta } else { 0.0 }
        })
        .sum();
    loss / n + lambda * coefficients.iter().map(|b| b.abs()).sum::<f64>()
}

fn check_inputs(x: &FeatureMatrix, y: &[bool]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), found: y.len() });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    if x.rows().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    Ok(())
}

fn null_intercept(y: &[bool]) -> f64 {
    let rate = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
    (rate / (1.0 - rate)).ln()
}

/// Gradient of the mean loss at the intercept-only model.
fn null_gradient(x: &FeatureMatrix, y: &[bool]) -> (f64, Vec<f64>) {
    let b0 = null_intercept(y);
    let p = sigmoid(b0);
    let n = x.n_rows() as f64;
    let mut grad = vec![0.0; x.n_cols()];
    for (row, &yi) in x.rows().zip(y) {
        let r = p - if yi { 1.0 } else { 0.0 };
        for (g, v) in grad.iter_mut().zip(row) {
            *g += v * r;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (b0, grad)
}

/// Smallest penalty at which every coefficient is zero.
pub fn lambda_max(x: &FeatureMatrix, y: &[bool]) -> Result<f64> {
    check_inputs(x, y)?;
    let (_, grad) = null_gradient(x, y);
    Ok(grad.iter().fold(0.0, |m, g| m.max(g.abs())))
}

pub fn fit_lasso_logistic(
    x: &FeatureMatrix,
    y: &[bool],
    lambda: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<LassoLogisticModel> {
    fit_from(x, y, lambda, &LassoOptions { tolerance, max_iterations }, None)
}

/// Cyclic coordinate descent with a quadratic majoriser per coordinate
/// (curvature bound 1/4 on the logistic loss) and soft-thresholding.
/// `start` warm-starts from `(intercept, coefficients)`.
pub(crate) fn fit_from(
    x: &FeatureMatrix,
    y: &[bool],
    lambda: f64,
    opts: &LassoOptions,
    start: Option<(f64, &[f64])>,
) -> Result<LassoLogisticModel> {
    check_inputs(x, y)?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    let n = x.n_rows();
    let p = x.n_cols();
    let nf = n as f64;

    let (b0, null_grad) = null_gradient(x, y);
    if null_grad.iter().all(|g| g.abs() <= lambda) {
        let coefficients = vec![0.0; p];
        let objective = penalized_objective(x, y, b0, &coefficients, lambda);
        return Ok(LassoLogisticModel {
            intercept: b0,
            coefficients,
            lambda,
            converged: true,
            iterations_used: 0,
            objective_trace: vec![objective],
        });
    }

    let (mut intercept, mut beta) = match start {
        Some((b, coefs)) if coefs.len() == p => (b, coefs.to_vec()),
        _ => (b0, vec![0.0; p]),
    };
    let targets: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let mut eta: Vec<f64> = x.rows().map(|r| intercept + r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).collect();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let curvature: Vec<f64> = columns.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / (4.0 * nf)).collect();

    let mut trace = vec![penalized_objective(x, y, intercept, &beta, lambda)];
    let mut converged = false;
    let mut iterations_used = 0;
    for _ in 0..opts.max_iterations {
        iterations_used += 1;
        let mut max_change: f64 = 0.0;

        let resid_mean = eta.iter().zip(&targets).map(|(&e, t)| sigmoid(e) - t).sum::<f64>() / nf;
        let delta = -4.0 * resid_mean;
        if delta != 0.0 {
            intercept += delta;
            eta.iter_mut().for_each(|e| *e += delta);
            max_change = max_change.max(delta.abs());
        }

        for j in 0..p {
            let lj = curvature[j];
            if lj == 0.0 {
                continue;
            }
            let col = &columns[j];
            let grad = col
                .iter()
                .zip(eta.iter().zip(&targets))
                .map(|(v, (&e, t))| v * (sigmoid(e) - t))
                .sum::<f64>()
                / nf;
            let old = beta[j];
            let new = soft_threshold(old - grad / lj, lambda / lj);
            if new != old {
                let d = new - old;
                eta.iter_mut().zip(col).for_each(|(e, v)| *e += v * d);
                beta[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        trace.push(penalized_objective(x, y, intercept, &beta, lambda));
        if max_change < opts.tolerance {
            converged = true;
            break;
        }
    }

    Ok(LassoLogisticModel { intercept, coefficients: beta, lambda, converged, iterations_used, objective_trace: trace })
}
