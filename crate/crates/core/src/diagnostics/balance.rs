use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{MatchSet, BALANCE_THRESHOLD};
use crate::selector::CovariateSelection;
use crate::textfeat::FeatureMatrix;

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Difference in means over the pooled standard deviation
/// `sqrt((s_t^2 + s_c^2) / 2)`, with sample (n-1) variances.
pub fn standardized_mean_difference(treated: &[f64], control: &[f64]) -> Result<f64> {
    if treated.is_empty() || control.is_empty() {
        return Err(Error::invalid("standardized mean difference needs two nonempty samples"));
    }
    if treated.iter().chain(control).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("standardized mean difference input".into()));
    }
    let (mt, vt) = mean_var(treated);
    let (mc, vc) = mean_var(control);
    let pooled = ((vt + vc) / 2.0).sqrt();
    if pooled == 0.0 {
        if mt == mc {
            return Ok(0.0);
        }
        return Err(Error::DegenerateVariance { treated_mean: mt, control_mean: mc });
    }
    Ok((mt - mc) / pooled)
}

/// As [`standardized_mean_difference`], mapping a zero pooled variance with
/// unequal means to a signed infinity.
fn smd_or_infinite(treated: &[f64], control: &[f64]) -> f64 {
    match standardized_mean_difference(treated, control) {
        Ok(d) => d,
        Err(Error::DegenerateVariance { treated_mean, control_mean }) => {
            if treated_mean > control_mean { f64::INFINITY } else { f64::NEG_INFINITY }
        }
        Err(_) => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub smd_before: f64,
    pub smd_after: f64,
    pub balanced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub rows: Vec<BalanceRow>,
    /// True when every row is balanced.
    pub balanced: bool,
}

/// Rows for the columns of `x`, named by `names`. Matched controls count
/// once per pair they appear in.
pub(crate) fn balance_rows(set: &MatchSet, x: &FeatureMatrix, treatment: &[bool], names: &[String], threshold: f64) -> Vec<BalanceRow> {
    (0..x.n_cols())
        .map(|j| {
            let col = x.column(j);
            let before_t: Vec<f64> = (0..col.len()).filter(|&i| treatment[i]).map(|i| col[i]).collect();
            let before_c: Vec<f64> = (0..col.len()).filter(|&i| !treatment[i]).map(|i| col[i]).collect();
            let after_t: Vec<f64> = set.pairs.iter().map(|p| col[p.treated]).collect();
            let after_c: Vec<f64> = set.pairs.iter().map(|p| col[p.control]).collect();
            let smd_after = smd_or_infinite(&after_t, &after_c);
            BalanceRow {
                covariate: names[j].clone(),
                smd_before: smd_or_infinite(&before_t, &before_c),
                smd_after,
                balanced: smd_after.abs() < threshold,
            }
        })
        .collect()
}

/// SMD of every selected covariate before matching (all treated vs all
/// controls) and after matching.
pub fn balance_report(set: &MatchSet, x: &FeatureMatrix, treatment: &[bool], selection: &CovariateSelection) -> Result<BalanceReport> {
    if set.is_empty() {
        return Err(Error::invalid("balance needs a nonempty match set"));
    }
    if treatment.len() != x.n_rows() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), found: treatment.len() });
    }
    if let Some(&bad) = selection.indices.iter().find(|&&j| j >= x.n_cols()) {
        return Err(Error::invalid(format!("selected column {bad} is outside the feature matrix")));
    }
    let selected = x.select_columns(&selection.indices);
    let rows = balance_rows(set, &selected, treatment, &selection.names, BALANCE_THRESHOLD);
    let balanced = rows.iter().all(|r| r.balanced);
    Ok(BalanceReport { rows, balanced })
}
