//! In-memory composition of selection, matching and effect estimation on an
//! already standardised feature matrix.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    absolute_mean_difference, balance_report, eate, median_ratio_effect, permutation_test, BalanceReport, EffectStatistic,
    PermutationMode, PermutationResult,
};
use crate::error::{Error, Result};
use crate::matcher::{match_one_to_many, sweep_caliper, CaliperGrid, MatchSet, SweepConditions, SweepOutcome};
use crate::selector::{cross_validate, default_lambda_grid, select_covariates, CovariateSelection, CvOptions, CvResult};
use crate::textfeat::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaliperChoice {
    Fixed(f64),
    Sweep(CaliperGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub cv: CvOptions,
    /// `None` uses the default 50-point grid below `lambda_max`.
    pub lambda_grid: Option<Vec<f64>>,
    pub caliper: CaliperChoice,
    pub min_pairs: usize,
    pub statistic: EffectStatistic,
    pub permutations: usize,
    pub permutation_seed: u64,
    pub permutation_mode: PermutationMode,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            cv: CvOptions::default(),
            lambda_grid: None,
            caliper: CaliperChoice::Sweep(CaliperGrid::default()),
            min_pairs: 1,
            statistic: EffectStatistic::Absdiff,
            permutations: 10_000,
            permutation_seed: 0,
            permutation_mode: PermutationMode::Paired,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub cv: CvResult,
    pub selection: CovariateSelection,
    /// Present when the caliper was swept.
    pub sweep: Option<SweepOutcome>,
    pub match_set: MatchSet,
    pub balance: BalanceReport,
    /// The configured statistic on its reporting scale (percent for EATE,
    /// outcome units for the difference, ratio for the median ratio).
    pub effect: f64,
    pub permutation: PermutationResult,
}

/// Selects covariates, sweeps the caliper over those columns and estimates
/// the effect. An exhausted sweep is [`Error::SweepExhausted`].
pub fn analyze(x: &FeatureMatrix, names: &[String], treatment: &[bool], outcomes: &[f64], opts: &AnalysisOptions) -> Result<Analysis> {
    if names.len() != x.n_cols() {
        return Err(Error::DimensionMismatch { expected: x.n_cols(), found: names.len() });
    }
    if outcomes.len() != x.n_rows() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), found: outcomes.len() });
    }
    let grid = match &opts.lambda_grid {
        Some(g) => g.clone(),
        None => default_lambda_grid(x, treatment)?,
    };
    let cv = cross_validate(x, treatment, &grid, &opts.cv)?;
    let selection = select_covariates(cv.chosen_model(), names)?;
    let xs = x.select_columns(&selection.indices);

    let (sweep, match_set) = match opts.caliper {
        CaliperChoice::Fixed(c) => (None, match_one_to_many(&xs, treatment, &selection.weights, c)?),
        CaliperChoice::Sweep(g) => {
            let conditions = SweepConditions { min_pairs: opts.min_pairs, ..SweepConditions::default() };
            let mut outcome = sweep_caliper(&xs, treatment, &selection.weights, &selection.names, &g, &conditions)?;
            let set = outcome.match_set.take().ok_or(Error::SweepExhausted { start: g.start, stop: g.stop })?;
            (Some(outcome), set)
        }
    };
    let balance = balance_report(&match_set, x, treatment, &selection)?;
    let effect = estimate(&match_set, outcomes, opts.statistic)?;
    let permutation = permutation_test(&match_set, outcomes, opts.statistic, opts.permutations, opts.permutation_seed, opts.permutation_mode)?;
    Ok(Analysis { cv, selection, sweep, match_set, balance, effect, permutation })
}

pub fn estimate(set: &MatchSet, outcomes: &[f64], statistic: EffectStatistic) -> Result<f64> {
    match statistic {
        EffectStatistic::Eate => eate(set, outcomes),
        EffectStatistic::Absdiff => absolute_mean_difference(set, outcomes),
        EffectStatistic::MedianRatio => Ok(median_ratio_effect(&set.pairs, outcomes)?.ratio),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffPoint {
    pub cutoff: u64,
    pub n_treated: usize,
    pub n_pairs: usize,
    pub caliper: f64,
    pub effect: f64,
    pub p_value: f64,
    /// 95% quantile of |permuted statistic|: the half-width of the null band.
    pub null_band: f64,
}

/// Re-runs [`analyze`] with treatment redefined at each cutoff. `at_cutoff`
/// returns the treatment labels and observed outcomes for a cutoff.
pub fn cutoff_sweep<F>(x: &FeatureMatrix, names: &[String], cutoffs: &[u64], at_cutoff: F, opts: &AnalysisOptions) -> Result<Vec<CutoffPoint>>
where
    F: Fn(u64) -> Result<(Vec<bool>, Vec<f64>)>,
{
    cutoffs
        .iter()
        .map(|&cutoff| {
            let (t, y) = at_cutoff(cutoff)?;
            let a = analyze(x, names, &t, &y, opts)?;
            Ok(CutoffPoint {
                cutoff,
                n_treated: t.iter().filter(|&&v| v).count(),
                n_pairs: a.match_set.len(),
                caliper: a.match_set.caliper,
                effect: a.effect,
                p_value: a.permutation.p_value,
                null_band: a.permutation.null_abs_quantile(0.95).unwrap_or(0.0),
            })
        })
        .collect()
}
