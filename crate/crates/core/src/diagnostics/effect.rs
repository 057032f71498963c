use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{MatchSet, MatchedPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectStatistic {
    /// Mean percent lift over the matched control outcome.
    Eate,
    /// Mean paired difference in outcome units.
    #[serde(alias = "absolute-mean-difference")]
    Absdiff,
    /// Median of per-treated-unit median rate ratios.
    MedianRatio,
}

impl EffectStatistic {
    pub fn name(self) -> &'static str {
        match self {
            EffectStatistic::Eate => "eate",
            EffectStatistic::Absdiff => "absdiff",
            EffectStatistic::MedianRatio => "median-ratio",
        }
    }
}

impl std::str::FromStr for EffectStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eate" => Ok(Self::Eate),
            "absdiff" | "absolute-mean-difference" => Ok(Self::Absdiff),
            "median-ratio" => Ok(Self::MedianRatio),
            other => Err(Error::Config(format!("unknown statistic `{other}`"))),
        }
    }
}

/// Matched outcome values: one `(treated, control)` per pair plus the
/// treated row each pair belongs to.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PairedValues {
    pub values: Vec<(f64, f64)>,
    pub groups: Vec<usize>,
}

pub(crate) fn paired_values(pairs: &[MatchedPair], outcomes: &[f64]) -> Result<PairedValues> {
    let fetch = |row: usize, id: &str| -> Result<f64> {
        match outcomes.get(row) {
            Some(v) if v.is_finite() => Ok(*v),
            _ => Err(Error::MissingOutcome { unit: id.to_string() }),
        }
    };
    let mut values = Vec::with_capacity(pairs.len());
    for p in pairs {
        values.push((fetch(p.treated, &p.treated_id)?, fetch(p.control, &p.control_id)?));
    }
    Ok(PairedValues { values, groups: pairs.iter().map(|p| p.treated).collect() })
}

/// NaN when some control outcome is zero.
pub(crate) fn eate_of(values: &[(f64, f64)]) -> f64 {
    let mut sum = 0.0;
    for &(t, c) in values {
        if c == 0.0 {
            return f64::NAN;
        }
        sum += (t - c) * 100.0 / c;
    }
    sum / values.len() as f64
}

pub(crate) fn absdiff_of(values: &[(f64, f64)]) -> f64 {
    values.iter().map(|(t, c)| t - c).sum::<f64>() / values.len() as f64
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// (median of per-group medians, excluded pair count). Pairs with a
/// nonpositive rate on either side are skipped.
pub(crate) fn median_ratio_of(values: &[(f64, f64)], groups: &[usize]) -> (Option<f64>, usize, usize) {
    let mut order: Vec<usize> = Vec::new();
    let mut per_group: std::collections::HashMap<usize, Vec<f64>> = Default::default();
    let mut excluded = 0;
    for (&(t, c), &g) in values.iter().zip(groups) {
        if t > 0.0 && c > 0.0 {
            per_group.entry(g).or_insert_with(|| {
                order.push(g);
                Vec::new()
            }).push(t / c);
        } else {
            excluded += 1;
        }
    }
    let mut medians: Vec<f64> = order
        .iter()
        .filter_map(|g| median(per_group.get_mut(g).expect("group recorded")))
        .collect();
    let units = medians.len();
    (median(&mut medians), excluded, units)
}

/// Mean over pairs of `(Y_t - Y_c) * 100 / Y_c`.
pub fn eate(set: &MatchSet, outcomes: &[f64]) -> Result<f64> {
    nonempty(set)?;
    let pv = paired_values(&set.pairs, outcomes)?;
    if let Some(p) = set.pairs.iter().zip(&pv.values).find(|(_, v)| v.1 == 0.0).map(|(p, _)| p) {
        return Err(Error::ZeroControlOutcome { treated: p.treated_id.clone(), control: p.control_id.clone() });
    }
    Ok(eate_of(&pv.values))
}

/// Mean over pairs of `Y_t - Y_c`.
pub fn absolute_mean_difference(set: &MatchSet, outcomes: &[f64]) -> Result<f64> {
    nonempty(set)?;
    Ok(absdiff_of(&paired_values(&set.pairs, outcomes)?.values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRatioEffect {
    pub ratio: f64,
    /// `(ratio - 1) * 100`
    pub percent: f64,
    pub excluded_pairs: usize,
    pub units: usize,
}

/// Median over treated units of the median `rate_t / rate_c` across that
/// unit's pairs.
pub fn median_ratio_effect(pairs: &[MatchedPair], rates: &[f64]) -> Result<MedianRatioEffect> {
    if pairs.is_empty() {
        return Err(Error::invalid("effect estimation needs at least one matched pair"));
    }
    let pv = paired_values(pairs, rates)?;
    let (ratio, excluded_pairs, units) = median_ratio_of(&pv.values, &pv.groups);
    let ratio = ratio.ok_or_else(|| Error::invalid("every pair has a nonpositive rate; median ratio undefined"))?;
    Ok(MedianRatioEffect { ratio, percent: (ratio - 1.0) * 100.0, excluded_pairs, units })
}

fn nonempty(set: &MatchSet) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid("effect estimation needs at least one matched pair"));
    }
    Ok(())
}
