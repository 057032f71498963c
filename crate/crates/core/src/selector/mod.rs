//! Covariate selection: an L1-penalised logistic model predicting treatment,
//! with the penalty chosen by stratified cross-validated AUC.

mod auc;
mod cv;
mod lasso;

pub use auc::auc;
pub use cv::{cross_validate, default_lambda_grid, fit_path, lambda_grid, stratified_folds, CvOptions, CvResult};
pub use lasso::{fit_lasso_logistic, lambda_max, penalized_objective, LassoLogisticModel, LassoOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients at or below this magnitude count as zero.
pub const ZERO_COEFFICIENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSelection {
    pub names: Vec<String>,
    /// Column positions in the feature schema.
    pub indices: Vec<usize>,
    /// |coefficient| for each selected covariate.
    pub weights: Vec<f64>,
}

impl CovariateSelection {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Keeps the covariates with nonzero coefficients, weighted by magnitude.
/// The intercept is never part of the selection.
pub fn select_covariates(model: &LassoLogisticModel, names: &[String]) -> Result<CovariateSelection> {
    if names.len() != model.coefficients.len() {
        return Err(Error::DimensionMismatch { expected: model.coefficients.len(), found: names.len() });
    }
    let mut sel = CovariateSelection { names: vec![], indices: vec![], weights: vec![] };
    for (j, (&b, name)) in model.coefficients.iter().zip(names).enumerate() {
        if b.abs() > ZERO_COEFFICIENT {
            sel.names.push(name.clone());
            sel.indices.push(j);
            sel.weights.push(b.abs());
        }
    }
    if sel.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(sel)
}
