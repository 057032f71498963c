//! Nearest-control matching under weighted cosine similarity.
//!
//! Each treated unit is paired with its most similar control; pairs below
//! the caliper are pruned. Controls may be reused (matching with
//! replacement). The caliper sweep raises the threshold until balance and
//! sample-size conditions hold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{balance_rows, permutation_test, BalanceRow, EffectStatistic, PermutationMode};
use crate::error::{Error, Result};
use crate::textfeat::FeatureMatrix;

pub const BALANCE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    /// Row indices into the feature matrix / unit table.
    pub treated: usize,
    pub control: usize,
    pub treated_id: String,
    pub control_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub caliper: f64,
    pub pairs: Vec<MatchedPair>,
    pub unmatched_treated: Vec<String>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn distinct_controls(&self) -> usize {
        let mut c: Vec<usize> = self.pairs.iter().map(|p| p.control).collect();
        c.sort_unstable();
        c.dedup();
        c.len()
    }
}

/// Cosine of the elementwise products `u * w` and `v * w`; zero when either
/// weighted vector vanishes.
pub fn weighted_cosine_similarity(u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    if u.len() != w.len() || v.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), found: if u.len() != w.len() { u.len() } else { v.len() } });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for ((a, b), c) in u.iter().zip(v).zip(w) {
        let (a, b) = (a * c, b * c);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

fn unit_vector(row: &[f64], w: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = row.iter().zip(w).map(|(a, b)| a * b).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}

/// The most similar control for every treated unit, before any caliper.
#[derive(Debug, Clone)]
pub struct NearestControls {
    ids: Vec<String>,
    /// (treated row, best control row, similarity)
    best: Vec<(usize, usize, f64)>,
}

pub fn nearest_controls(x: &FeatureMatrix, treatment: &[bool], weights: &[f64]) -> Result<NearestControls> {
    if treatment.len() != x.n_rows() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), found: treatment.len() });
    }
    if weights.len() != x.n_cols() {
        return Err(Error::DimensionMismatch { expected: x.n_cols(), found: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("matching weights must be positive and finite"));
    }
    let treated: Vec<usize> = (0..treatment.len()).filter(|&i| treatment[i]).collect();
    let controls: Vec<usize> = (0..treatment.len()).filter(|&i| !treatment[i]).collect();
    if treated.is_empty() || controls.is_empty() {
        return Err(Error::SingleClass);
    }
    let ids = x.unit_ids();
    let control_vecs: Vec<Vec<f64>> = controls.iter().map(|&c| unit_vector(x.row(c), weights)).collect();

    let best = treated
        .par_iter()
        .map(|&t| {
            let tv = unit_vector(x.row(t), weights);
            let zero = tv.iter().all(|&a| a == 0.0);
            let mut best: Option<(usize, f64)> = None;
            for (ci, cv) in controls.iter().zip(&control_vecs) {
                let sim = if zero || cv.iter().all(|&a| a == 0.0) {
                    0.0
                } else {
                    tv.iter().zip(cv).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0)
                };
                let take = match best {
                    None => true,
                    Some((b, s)) => sim > s || (sim == s && ids[*ci] < ids[b]),
                };
                if take {
                    best = Some((*ci, sim));
                }
            }
            let (c, s) = best.expect("controls nonempty");
            (t, c, s)
        })
        .collect();
    Ok(NearestControls { ids: ids.to_vec(), best })
}

impl NearestControls {
    /// Applies a caliper; may return an empty match set.
    pub fn prune(&self, caliper: f64) -> MatchSet {
        let mut pairs = Vec::new();
        let mut unmatched_treated = Vec::new();
        for &(t, c, similarity) in &self.best {
            if similarity >= caliper {
                pairs.push(MatchedPair {
                    treated: t,
                    control: c,
                    treated_id: self.ids[t].clone(),
                    control_id: self.ids[c].clone(),
                    similarity,
                });
            } else {
                unmatched_treated.push(self.ids[t].clone());
            }
        }
        MatchSet { caliper, pairs, unmatched_treated }
    }
}

/// `x` holds only the matching covariates, aligned with `weights`.
pub fn match_one_to_many(x: &FeatureMatrix, treatment: &[bool], weights: &[f64], caliper: f64) -> Result<MatchSet> {
    let set = nearest_controls(x, treatment, weights)?.prune(caliper);
    if set.is_empty() {
        return Err(Error::NoMatches { caliper });
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaliperGrid {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl Default for CaliperGrid {
    fn default() -> Self {
        Self { start: 0.9, step: 0.005, stop: 0.995 }
    }
}

impl CaliperGrid {
    /// Parses `start:step:stop`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(Error::Config(format!("caliper sweep `{s}` is not start:step:stop")));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{t}` in caliper sweep")));
        let grid = Self { start: num(a)?, step: num(b)?, stop: num(c)? };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.step.is_finite() || self.step <= 0.0 || !self.start.is_finite() || !self.stop.is_finite() || self.stop < self.start {
            return Err(Error::Config("caliper sweep needs step > 0 and stop >= start".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.start + self.step * i as f64) * 1e12).round() / 1e12)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceCheck {
    /// Outcome per unit row.
    pub outcomes: Vec<f64>,
    pub statistic: EffectStatistic,
    pub mode: PermutationMode,
    pub permutations: usize,
    pub seed: u64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConditions {
    pub max_abs_smd: f64,
    pub min_pairs: usize,
    pub significance: Option<SignificanceCheck>,
}

impl Default for SweepConditions {
    fn default() -> Self {
        Self { max_abs_smd: BALANCE_THRESHOLD, min_pairs: 1, significance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaliperDiagnostics {
    pub caliper: f64,
    pub n_pairs: usize,
    pub n_unmatched: usize,
    pub distinct_controls: usize,
    pub balance: Vec<BalanceRow>,
    pub max_abs_smd: f64,
    pub balanced: bool,
    pub p_value: Option<f64>,
    pub conditions_met: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Satisfied,
    Exhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub status: SweepStatus,
    pub chosen_caliper: Option<f64>,
    #[serde(skip)]
    pub match_set: Option<MatchSet>,
    pub trace: Vec<CaliperDiagnostics>,
}

/// Scans calipers upward and stops at the first one meeting every condition.
/// Exhaustion is reported through [`SweepStatus`], never as an error.
pub fn sweep_caliper(
    x: &FeatureMatrix,
    treatment: &[bool],
    weights: &[f64],
    names: &[String],
    grid: &CaliperGrid,
    conditions: &SweepConditions,
) -> Result<SweepOutcome> {
    grid.validate()?;
    if names.len() != x.n_cols() {
        return Err(Error::DimensionMismatch { expected: x.n_cols(), found: names.len() });
    }
    let nearest = nearest_controls(x, treatment, weights)?;
    let mut trace = Vec::new();
    for caliper in grid.values() {
        let set = nearest.prune(caliper);
        let mut diag = CaliperDiagnostics {
            caliper,
            n_pairs: set.len(),
            n_unmatched: set.unmatched_treated.len(),
            distinct_controls: set.distinct_controls(),
            balance: vec![],
            max_abs_smd: f64::INFINITY,
            balanced: false,
            p_value: None,
            conditions_met: false,
        };
        if !set.is_empty() {
            diag.balance = balance_rows(&set, x, treatment, names, conditions.max_abs_smd);
            diag.max_abs_smd = diag.balance.iter().map(|r| r.smd_after.abs()).fold(0.0, f64::max);
            diag.balanced = diag.balance.iter().all(|r| r.balanced);
            let mut ok = diag.balanced && set.len() >= conditions.min_pairs;
            if let (true, Some(sig)) = (ok, &conditions.significance) {
                let p = permutation_test(&set, &sig.outcomes, sig.statistic, sig.permutations, sig.seed, sig.mode)
                    .map(|r| r.p_value)
                    .unwrap_or(1.0);
                diag.p_value = Some(p);
                ok = p < sig.alpha;
            }
            diag.conditions_met = ok;
        }
        let done = diag.conditions_met;
        trace.push(diag);
        if done {
            return Ok(SweepOutcome {
                status: SweepStatus::Satisfied,
                chosen_caliper: Some(caliper),
                match_set: Some(set),
                trace,
            });
        }
    }
    Ok(SweepOutcome { status: SweepStatus::Exhausted, chosen_caliper: None, match_set: None, trace })
}
