//! Python bindings: synthetic studies, the end-to-end analysis, and the
//! individual estimators.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use matchcause::diagnostics::{self, EffectStatistic, PermutationMode};
use matchcause::matcher::CaliperGrid;
use matchcause::pipeline::{self, AnalysisOptions, CaliperChoice};
use matchcause::selector;
use matchcause::synthgen::{self, MediationConfig, SynthConfig};
use matchcause::textfeat::{self, FeatureMatrix};

fn py_err(e: matchcause::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(x: Vec<Vec<f64>>) -> PyResult<FeatureMatrix> {
    let ids = (0..x.len()).map(|i| i.to_string()).collect();
    FeatureMatrix::from_rows(ids, &x).map_err(py_err)
}

/// A generated study with known ground truth.
#[pyclass(frozen, get_all)]
struct SynthStudy {
    unit_ids: Vec<String>,
    covariate_names: Vec<String>,
    x: Vec<Vec<f64>>,
    treatment: Vec<bool>,
    outcomes: Vec<f64>,
    mediator: Option<Vec<f64>>,
    tau: f64,
    treated_effect: f64,
    naive_difference: f64,
}

#[pymethods]
impl SynthStudy {
    fn __repr__(&self) -> String {
        format!("SynthStudy(n={}, tau={}, naive_difference={:.4})", self.unit_ids.len(), self.tau, self.naive_difference)
    }
}

/// Draws a study. `gamma`/`delta` default to ones; `mediation` is `(a, b)`.
#[pyfunction]
#[pyo3(signature = (n_units, tau, seed=0, n_confounders=1, gamma=None, delta=None, tau_sd=0.0, outcome_noise_sd=1.0, mediation=None))]
#[allow(clippy::too_many_arguments)]
fn generate_study(
    n_units: usize,
    tau: f64,
    seed: u64,
    n_confounders: usize,
    gamma: Option<Vec<f64>>,
    delta: Option<Vec<f64>>,
    tau_sd: f64,
    outcome_noise_sd: f64,
    mediation: Option<(f64, f64)>,
) -> PyResult<SynthStudy> {
    let cfg = SynthConfig {
        n_units,
        n_confounders,
        gamma: gamma.unwrap_or_else(|| vec![1.0; n_confounders]),
        delta: delta.unwrap_or_else(|| vec![1.0; n_confounders]),
        tau,
        tau_sd,
        mediation: mediation.map(|(a, b)| MediationConfig { a, b, noise_sd: 1.0 }),
        outcome_noise_sd,
        feedback: None,
        seed,
    };
    let s = synthgen::generate_study(&cfg).map_err(py_err)?;
    Ok(SynthStudy {
        x: s.x.rows().map(<[f64]>::to_vec).collect(),
        tau: s.ground_truth.tau,
        treated_effect: s.ground_truth.treated_effect,
        naive_difference: s.ground_truth.naive_difference,
        unit_ids: s.unit_ids,
        covariate_names: s.covariate_names,
        treatment: s.treatment,
        outcomes: s.outcomes,
        mediator: s.mediator,
    })
}

/// Result of [`analyze`]. Pairs are `(treated_row, control_row, similarity)`.
#[pyclass(frozen, get_all)]
struct Analysis {
    effect: f64,
    p_value: f64,
    caliper: f64,
    chosen_lambda: f64,
    selected: Vec<String>,
    weights: Vec<f64>,
    pairs: Vec<(usize, usize, f64)>,
    /// `(covariate, smd_before, smd_after)`
    balance: Vec<(String, f64, f64)>,
    balanced: bool,
}

#[pymethods]
impl Analysis {
    fn __repr__(&self) -> String {
        format!("Analysis(effect={:.4}, p_value={:.4}, caliper={}, pairs={})", self.effect, self.p_value, self.caliper, self.pairs.len())
    }
}

fn parse<T: std::str::FromStr<Err = matchcause::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// Covariate selection, caliper matching, balance, effect and permutation
/// test in one call. `caliper=None` sweeps `sweep` ("start:step:stop").
#[pyfunction]
#[pyo3(signature = (x, names, treatment, outcomes, statistic="absdiff", caliper=None, sweep="0.9:0.005:0.995", min_pairs=1, folds=10, cv_seed=0, permutations=10_000, permutation_seed=0, permutation_mode="paired"))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    names: Vec<String>,
    treatment: Vec<bool>,
    outcomes: Vec<f64>,
    statistic: &str,
    caliper: Option<f64>,
    sweep: &str,
    min_pairs: usize,
    folds: usize,
    cv_seed: u64,
    permutations: usize,
    permutation_seed: u64,
    permutation_mode: &str,
) -> PyResult<Analysis> {
    let x = matrix(x)?;
    let mut opts = AnalysisOptions {
        caliper: match caliper {
            Some(c) => CaliperChoice::Fixed(c),
            None => CaliperChoice::Sweep(CaliperGrid::parse(sweep).map_err(py_err)?),
        },
        min_pairs,
        statistic: parse::<EffectStatistic>(statistic)?,
        permutations,
        permutation_seed,
        permutation_mode: parse::<PermutationMode>(permutation_mode)?,
        ..AnalysisOptions::default()
    };
    opts.cv.folds = folds;
    opts.cv.seed = cv_seed;
    let a = py.detach(|| pipeline::analyze(&x, &names, &treatment, &outcomes, &opts)).map_err(py_err)?;
    Ok(Analysis {
        effect: a.effect,
        p_value: a.permutation.p_value,
        caliper: a.match_set.caliper,
        chosen_lambda: a.cv.chosen_lambda(),
        selected: a.selection.names.clone(),
        weights: a.selection.weights.clone(),
        pairs: a.match_set.pairs.iter().map(|p| (p.treated, p.control, p.similarity)).collect(),
        balance: a.balance.rows.iter().map(|r| (r.covariate.clone(), r.smd_before, r.smd_after)).collect(),
        balanced: a.balance.balanced,
    })
}

#[pyfunction]
fn standardized_mean_difference(treated: Vec<f64>, control: Vec<f64>) -> PyResult<f64> {
    diagnostics::standardized_mean_difference(&treated, &control).map_err(py_err)
}

#[pyfunction]
fn sobel_z(a: f64, b: f64, se_a: f64, se_b: f64) -> f64 {
    diagnostics::sobel_z(a, b, se_a, se_b)
}

/// Returns `(indirect_effect, sobel_z, sobel_p, proportion_mediated)`.
#[pyfunction]
fn sobel_test(treatment: Vec<bool>, mediator: Vec<f64>, outcome: Vec<f64>) -> PyResult<(f64, f64, f64, Option<f64>)> {
    let r = diagnostics::sobel_test(&treatment, &mediator, &outcome, "mediator").map_err(py_err)?;
    Ok((r.indirect_effect, r.sobel_z, r.sobel_p, r.proportion_mediated))
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    selector::auc(&scores, &labels).map_err(py_err)
}

/// Returns `(intercept, coefficients)`.
#[pyfunction]
#[pyo3(signature = (x, y, lam, tolerance=1e-8, max_iterations=10_000))]
fn fit_lasso_logistic(x: Vec<Vec<f64>>, y: Vec<bool>, lam: f64, tolerance: f64, max_iterations: usize) -> PyResult<(f64, Vec<f64>)> {
    let m = selector::fit_lasso_logistic(&matrix(x)?, &y, lam, tolerance, max_iterations).map_err(py_err)?;
    Ok((m.intercept, m.coefficients))
}

#[pyfunction]
fn lambda_max(x: Vec<Vec<f64>>, y: Vec<bool>) -> PyResult<f64> {
    selector::lambda_max(&matrix(x)?, &y).map_err(py_err)
}

#[pyfunction]
fn weighted_cosine_similarity(u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> PyResult<f64> {
    matchcause::matcher::weighted_cosine_similarity(&u, &v, &w).map_err(py_err)
}

#[pyfunction]
fn sentiment_score(text: &str) -> f64 {
    textfeat::sentiment_score(text)
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textfeat::tokenize(text)
}

#[pymodule]
#[pyo3(name = "matchcause")]
fn matchcause_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SynthStudy>()?;
    m.add_class::<Analysis>()?;
    m.add_function(wrap_pyfunction!(generate_study, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(standardized_mean_difference, m)?)?;
    m.add_function(wrap_pyfunction!(sobel_z, m)?)?;
    m.add_function(wrap_pyfunction!(sobel_test, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lasso_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_max, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(sentiment_score, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    Ok(())
}
