//! Permutation significance for matched-pair effect statistics.
//!
//! `p = (1 + #{|T_perm| >= |T_obs|}) / (1 + permutations)`. In paired mode
//! with few enough pairs the full set of 2^n label swaps is enumerated
//! instead of sampled, giving the exact randomisation p-value.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::effect::{absdiff_of, eate_of, median_ratio_of, paired_values, EffectStatistic};
use crate::error::{Error, Result};
use crate::matcher::MatchSet;

/// Largest pair count enumerated exhaustively.
const MAX_EXACT_PAIRS: usize = 20;
/// Relative slack when comparing a permuted statistic with the observed one.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    /// Shuffle all matched outcomes, keeping the treated/control slot counts.
    Global,
    /// Swap treated and control outcomes within each pair.
    Paired,
}

impl std::str::FromStr for PermutationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "paired" => Ok(Self::Paired),
            other => Err(Error::Config(format!("unknown permutation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub statistic: EffectStatistic,
    pub mode: PermutationMode,
    /// Observed effect on the test scale (log ratio for the median-ratio statistic).
    pub observed: f64,
    pub p_value: f64,
    /// Number of relabellings compared, identity excluded.
    pub permutations: usize,
    pub seed: u64,
    pub exhaustive: bool,
    #[serde(skip)]
    pub null_distribution: Vec<f64>,
}

impl PermutationResult {
    /// `q`-quantile of |permuted statistic|, a half-width for a null band.
    pub fn null_abs_quantile(&self, q: f64) -> Option<f64> {
        let mut abs: Vec<f64> = self.null_distribution.iter().filter(|v| v.is_finite()).map(|v| v.abs()).collect();
        if abs.is_empty() {
            return None;
        }
        abs.sort_by(f64::total_cmp);
        let idx = ((q * abs.len() as f64).ceil() as usize).clamp(1, abs.len()) - 1;
        Some(abs[idx])
    }
}

/// Statistic on its test scale; NaN when undefined for this relabelling.
fn evaluate(stat: EffectStatistic, values: &[(f64, f64)], groups: &[usize]) -> f64 {
    match stat {
        EffectStatistic::Eate => eate_of(values),
        EffectStatistic::Absdiff => absdiff_of(values),
        EffectStatistic::MedianRatio => median_ratio_of(values, groups).0.map_or(f64::NAN, f64::ln),
    }
}

fn at_least_as_extreme(permuted: f64, observed_abs: f64) -> bool {
    permuted.abs() >= observed_abs * (1.0 - TIE_TOLERANCE)
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

pub fn permutation_test(
    set: &MatchSet,
    outcomes: &[f64],
    statistic: EffectStatistic,
    n_permutations: usize,
    seed: u64,
    mode: PermutationMode,
) -> Result<PermutationResult> {
    if set.is_empty() {
        return Err(Error::invalid("permutation test needs at least one matched pair"));
    }
    if n_permutations == 0 {
        return Err(Error::invalid("permutation count must be at least 1"));
    }
    let pv = paired_values(&set.pairs, outcomes)?;
    if statistic == EffectStatistic::Eate && pv.values.iter().any(|&(t, c)| t == 0.0 || c == 0.0) {
        // a relabelling could put the zero in the denominator
        let p = set.pairs.iter().zip(&pv.values).find(|(_, v)| v.0 == 0.0 || v.1 == 0.0).expect("found").0;
        return Err(Error::ZeroControlOutcome { treated: p.treated_id.clone(), control: p.control_id.clone() });
    }
    let observed = evaluate(statistic, &pv.values, &pv.groups);
    if !observed.is_finite() {
        return Err(Error::invalid(format!("observed {} statistic is undefined", statistic.name())));
    }
    let observed_abs = observed.abs();
    let n = pv.values.len();

    let exhaustive = mode == PermutationMode::Paired && n <= MAX_EXACT_PAIRS && (1usize << n) - 1 <= n_permutations;
    let null_distribution: Vec<f64> = if exhaustive {
        (1..(1usize << n))
            .into_par_iter()
            .map(|mask| {
                let swapped: Vec<(f64, f64)> = pv
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &(t, c))| if mask >> i & 1 == 1 { (c, t) } else { (t, c) })
                    .collect();
                evaluate(statistic, &swapped, &pv.groups)
            })
            .collect()
    } else {
        (0..n_permutations)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(seed, r);
                let permuted: Vec<(f64, f64)> = match mode {
                    PermutationMode::Paired => pv
                        .values
                        .iter()
                        .map(|&(t, c)| if rng.random::<bool>() { (c, t) } else { (t, c) })
                        .collect(),
                    PermutationMode::Global => {
                        let mut pool: Vec<f64> = pv.values.iter().map(|v| v.0).chain(pv.values.iter().map(|v| v.1)).collect();
                        pool.shuffle(&mut rng);
                        (0..n).map(|i| (pool[i], pool[n + i])).collect()
                    }
                };
                evaluate(statistic, &permuted, &pv.groups)
            })
            .collect()
    };

    let extreme = null_distribution.iter().filter(|&&s| at_least_as_extreme(s, observed_abs)).count();
    let permutations = null_distribution.len();
    let p_value = (1 + extreme) as f64 / (1 + permutations) as f64;
    Ok(PermutationResult { statistic, mode, observed, p_value, permutations, seed, exhaustive, null_distribution })
}
