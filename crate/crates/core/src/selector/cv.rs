use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::auc;
use super::lasso::{fit_from, lambda_max, LassoLogisticModel, LassoOptions};
use crate::error::{Error, Result};
use crate::textfeat::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    /// Accept the sparsest penalty whose mean AUC is within this of the best.
    pub sparsity_tolerance: f64,
    pub lasso: LassoOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { folds: 10, seed: 0, sparsity_tolerance: 0.01, lasso: LassoOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CvResult {
    /// Penalties in decreasing order.
    pub lambdas: Vec<f64>,
    pub mean_auc: Vec<f64>,
    /// `fold_auc[f][l]`
    pub fold_auc: Vec<Vec<f64>>,
    /// Nonzero coefficients of the full-data fit at each penalty.
    pub nonzero: Vec<usize>,
    pub best_index: usize,
    pub chosen_index: usize,
    pub fold_of: Vec<usize>,
    #[serde(skip)]
    pub path: Vec<LassoLogisticModel>,
}

impl CvResult {
    pub fn chosen_lambda(&self) -> f64 {
        self.lambdas[self.chosen_index]
    }

    pub fn chosen_model(&self) -> &LassoLogisticModel {
        &self.path[self.chosen_index]
    }
}

/// `size` penalties log-spaced from `lambda_max` down to `lambda_max * ratio`.
pub fn lambda_grid(lambda_max: f64, size: usize, ratio: f64) -> Vec<f64> {
    match size {
        0 => vec![],
        1 => vec![lambda_max],
        _ => {
            let step = ratio.ln() / (size - 1) as f64;
            (0..size).map(|i| lambda_max * (step * i as f64).exp()).collect()
        }
    }
}

pub fn default_lambda_grid(x: &FeatureMatrix, y: &[bool]) -> Result<Vec<f64>> {
    Ok(lambda_grid(lambda_max(x, y)?, 50, 1e-3))
}

/// Fold index per unit. Each class is shuffled separately and dealt
/// round-robin, so every fold receives both classes.
pub fn stratified_folds(y: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let mut neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    if pos.len() < folds || neg.len() < folds {
        return Err(Error::invalid(format!(
            "{folds}-fold stratified split needs at least {folds} units per class (have {} treated, {} control)",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold_of = vec![0; y.len()];
    for (k, &i) in pos.iter().chain(&neg).enumerate() {
        fold_of[i] = k % folds;
    }
    Ok(fold_of)
}

fn subset(x: &FeatureMatrix, y: &[bool], keep: &[usize]) -> Result<(FeatureMatrix, Vec<bool>)> {
    let ids = keep.iter().map(|&i| x.unit_ids()[i].clone()).collect();
    let data = keep.iter().flat_map(|&i| x.row(i).iter().copied()).collect();
    Ok((FeatureMatrix::new(ids, x.n_cols(), data)?, keep.iter().map(|&i| y[i]).collect()))
}

/// Fits the whole path with warm starts; `lambdas` must be decreasing.
pub fn fit_path(x: &FeatureMatrix, y: &[bool], lambdas: &[f64], opts: &LassoOptions) -> Result<Vec<LassoLogisticModel>> {
    let mut path: Vec<LassoLogisticModel> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let start = path.last().map(|m| (m.intercept, m.coefficients.as_slice()));
        path.push(fit_from(x, y, lambda, opts, start)?);
    }
    Ok(path)
}

pub fn cross_validate(x: &FeatureMatrix, y: &[bool], lambda_grid: &[f64], opts: &CvOptions) -> Result<CvResult> {
    if lambda_grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("lambda grid values must be finite and non-negative"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), found: y.len() });
    }
    if x.n_rows() < opts.folds {
        return Err(Error::invalid(format!("{} units cannot fill {} folds", x.n_rows(), opts.folds)));
    }
    let mut lambdas = lambda_grid.to_vec();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.dedup();

    let fold_of = stratified_folds(y, opts.folds, opts.seed)?;
    let fold_auc: Vec<Vec<f64>> = (0..opts.folds)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>> {
            let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
            let (xt, yt) = subset(x, y, &train)?;
            let labels: Vec<bool> = test.iter().map(|&i| y[i]).collect();
            fit_path(&xt, &yt, &lambdas, &opts.lasso)?
                .iter()
                .map(|m| {
                    let scores: Vec<f64> = test.iter().map(|&i| m.linear_predictor(x.row(i))).collect();
                    auc(&scores, &labels)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mean_auc: Vec<f64> = (0..lambdas.len())
        .map(|l| fold_auc.iter().map(|f| f[l]).sum::<f64>() / opts.folds as f64)
        .collect();
    let path = fit_path(x, y, &lambdas, &opts.lasso)?;
    let nonzero: Vec<usize> = path.iter().map(LassoLogisticModel::nonzero).collect();

    let best_index = (0..lambdas.len())
        .reduce(|best, l| if mean_auc[l] > mean_auc[best] { l } else { best })
        .expect("grid is nonempty");
    let floor = mean_auc[best_index] - opts.sparsity_tolerance;
    let chosen_index = (0..lambdas.len())
        .filter(|&l| mean_auc[l] >= floor)
        .reduce(|c, l| {
            let better = nonzero[l] < nonzero[c] || (nonzero[l] == nonzero[c] && mean_auc[l] > mean_auc[c]);
            if better { l } else { c }
        })
        .expect("best index qualifies");

    Ok(CvResult { lambdas, mean_auc, fold_auc, nonzero, best_index, chosen_index, fold_of, path })
}
