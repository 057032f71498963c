//! Synthetic observational studies with known potential outcomes.
//!
//! `X ~ N(0, I)`, `P(T = 1 | X) = logistic(X·gamma)`, `Y(0) = X·delta + e`
//! and `Y(1) = Y(0) + tau_i`. With a mediation chain, `M(t) = a·t + u` and
//! both potential outcomes gain `b·M(t)`. Both counterfactuals are kept so
//! tests can compute the true effect of any match set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{EventKind, EventRecord, LB_TO_KG, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::matcher::MatchSet;
use crate::textfeat::FeatureMatrix;

/// Draws attempted before a single-class study is reported as an error.
pub const MAX_ATTEMPTS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediationConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default = "one")]
    pub noise_sd: f64,
}

/// Treatment from a feedback count instead of a coin flip:
/// `count ~ Poisson(exp(log_base_rate + X·gamma) * g)`, treated when
/// `count >= cutoff`. `g` is 1, or a mean-one Gamma frailty with the given
/// shape when `frailty_shape` is set; the frailty never touches the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    pub log_base_rate: f64,
    pub cutoff: u64,
    #[serde(default)]
    pub frailty_shape: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_units: usize,
    pub n_confounders: usize,
    /// Per-covariate effect on treatment assignment (length `n_confounders`).
    pub gamma: Vec<f64>,
    /// Per-covariate effect on the outcome (length `n_confounders`).
    pub delta: Vec<f64>,
    pub tau: f64,
    /// Standard deviation of per-unit effects; 0 gives a constant effect.
    #[serde(default)]
    pub tau_sd: f64,
    #[serde(default)]
    pub mediation: Option<MediationConfig>,
    #[serde(default = "one")]
    pub outcome_noise_sd: f64,
    #[serde(default)]
    pub feedback: Option<FeedbackConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    /// One confounder with unit effects on treatment and outcome.
    pub fn confounded(n_units: usize, tau: f64, seed: u64) -> Self {
        Self {
            n_units,
            n_confounders: 1,
            gamma: vec![1.0],
            delta: vec![1.0],
            tau,
            tau_sd: 0.0,
            mediation: None,
            outcome_noise_sd: 1.0,
            feedback: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units < 10 {
            return Err(Error::Config(format!("synthetic study needs at least 10 units, got {}", self.n_units)));
        }
        if self.n_confounders == 0 {
            return Err(Error::Config("synthetic study needs at least one covariate".into()));
        }
        for (name, v) in [("gamma", &self.gamma), ("delta", &self.delta)] {
            if v.len() != self.n_confounders {
                return Err(Error::Config(format!("{name} has {} entries for {} covariates", v.len(), self.n_confounders)));
            }
            if v.iter().any(|g| !g.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        let sd_ok = |s: f64| s.is_finite() && s >= 0.0;
        if !self.tau.is_finite() || !sd_ok(self.tau_sd) || !sd_ok(self.outcome_noise_sd) {
            return Err(Error::Config("tau must be finite and noise sds finite and non-negative".into()));
        }
        if let Some(m) = self.mediation {
            if !m.a.is_finite() || !m.b.is_finite() || !sd_ok(m.noise_sd) {
                return Err(Error::Config("mediation parameters must be finite".into()));
            }
        }
        if let Some(f) = self.feedback {
            if !f.log_base_rate.is_finite() {
                return Err(Error::Config("feedback base rate must be finite".into()));
            }
            if f.frailty_shape.is_some_and(|k| !(k > 0.0 && k.is_finite())) {
                return Err(Error::Config("feedback frailty shape must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tau: f64,
    /// Mean of `Y(1) - Y(0)` over all units.
    pub average_effect: f64,
    /// Mean of `Y(1) - Y(0)` over treated units.
    pub treated_effect: f64,
    pub naive_difference: f64,
    /// `naive_difference - treated_effect`
    pub naive_bias: f64,
    /// Seed actually used after any single-class redraws.
    pub seed_used: u64,
}

#[derive(Debug, Clone)]
pub struct SynthStudy {
    pub config: SynthConfig,
    pub unit_ids: Vec<String>,
    pub covariate_names: Vec<String>,
    pub x: FeatureMatrix,
    pub treatment: Vec<bool>,
    pub outcomes: Vec<f64>,
    /// Observed mediator `M(T)`.
    pub mediator: Option<Vec<f64>>,
    pub comment_counts: Option<Vec<u64>>,
    pub ground_truth: GroundTruth,
    y0: Vec<f64>,
    y1: Vec<f64>,
    /// `Y(1) - Y(0)` as drawn, free of the rounding in the subtraction.
    effects: Vec<f64>,
}

impl SynthStudy {
    pub fn len(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_ids.is_empty()
    }

    /// `(Y(0), Y(1))` for every unit. Estimators must not look at these.
    pub fn counterfactuals(&self) -> (&[f64], &[f64]) {
        (&self.y0, &self.y1)
    }

    /// Treatment and observed outcome had the cutoff been `cutoff` comments.
    pub fn outcomes_at_cutoff(&self, cutoff: u64) -> Result<(Vec<bool>, Vec<f64>)> {
        let counts = self
            .comment_counts
            .as_ref()
            .ok_or_else(|| Error::invalid("study was generated without feedback counts"))?;
        let t: Vec<bool> = counts.iter().map(|&c| c >= cutoff).collect();
        let y = t.iter().enumerate().map(|(i, &ti)| if ti { self.y1[i] } else { self.y0[i] }).collect();
        Ok((t, y))
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { f64::NAN } else { s / n as f64 }
}

fn draw(cfg: &SynthConfig, seed: u64) -> Result<SynthStudy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let n = cfg.n_units;
    let k = cfg.n_confounders;

    let data: Vec<f64> = (0..n * k).map(|_| std.sample(&mut rng)).collect();
    let mut treatment = Vec::with_capacity(n);
    let mut counts = cfg.feedback.map(|_| Vec::with_capacity(n));
    let (mut y0, mut y1) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut effects = Vec::with_capacity(n);
    let mut mediator = cfg.mediation.map(|_| Vec::with_capacity(n));

    for i in 0..n {
        let row = &data[i * k..(i + 1) * k];
        let lin_t: f64 = row.iter().zip(&cfg.gamma).map(|(a, b)| a * b).sum();
        let t = match cfg.feedback {
            None => rng.random::<f64>() < 1.0 / (1.0 + (-lin_t).exp()),
            Some(f) => {
                let mut rate = (f.log_base_rate + lin_t).exp();
                if let Some(shape) = f.frailty_shape {
                    rate *= Gamma::new(shape, 1.0 / shape).map_err(|e| Error::Config(format!("frailty: {e}")))?.sample(&mut rng);
                }
                let c = if rate > 0.0 {
                    Poisson::new(rate).map_err(|e| Error::Config(format!("feedback rate: {e}")))?.sample(&mut rng) as u64
                } else {
                    0
                };
                counts.as_mut().expect("feedback configured").push(c);
                c >= f.cutoff
            }
        };
        let base: f64 = row.iter().zip(&cfg.delta).map(|(a, b)| a * b).sum::<f64>() + cfg.outcome_noise_sd * std.sample(&mut rng);
        let tau_i = cfg.tau + cfg.tau_sd * std.sample(&mut rng);
        let (mut a0, mut effect) = (base, tau_i);
        if let Some(m) = cfg.mediation {
            let u = m.noise_sd * std.sample(&mut rng);
            a0 += m.b * u;
            effect += m.b * m.a;
            mediator.as_mut().expect("mediation configured").push(if t { m.a + u } else { u });
        }
        let a1 = a0 + effect;
        effects.push(effect);
        treatment.push(t);
        y0.push(a0);
        y1.push(a1);
    }

    let n_treated = treatment.iter().filter(|&&t| t).count();
    if n_treated == 0 || n_treated == n {
        return Err(Error::SingleClass);
    }
    let outcomes: Vec<f64> = (0..n).map(|i| if treatment[i] { y1[i] } else { y0[i] }).collect();
    let width = n.to_string().len();
    let unit_ids: Vec<String> = (0..n).map(|i| format!("u{i:0width$}")).collect();
    let covariate_names = (1..=k).map(|j| format!("x{j}")).collect();
    let effect = |i: usize| effects[i];
    let treated_effect = mean((0..n).filter(|&i| treatment[i]).map(effect));
    let naive_difference = mean((0..n).filter(|&i| treatment[i]).map(|i| outcomes[i]))
        - mean((0..n).filter(|&i| !treatment[i]).map(|i| outcomes[i]));
    let ground_truth = GroundTruth {
        tau: cfg.tau,
        average_effect: mean((0..n).map(effect)),
        treated_effect,
        naive_difference,
        naive_bias: naive_difference - treated_effect,
        seed_used: seed,
    };
    Ok(SynthStudy {
        config: cfg.clone(),
        x: FeatureMatrix::new(unit_ids.clone(), k, data)?,
        unit_ids,
        covariate_names,
        treatment,
        outcomes,
        mediator,
        comment_counts: counts,
        ground_truth,
        y0,
        y1,
        effects,
    })
}

/// Deterministic in `config.seed`. A draw with only one treatment class is
/// retried with the seed shifted by one, at most [`MAX_ATTEMPTS`] times.
pub fn generate_study(config: &SynthConfig) -> Result<SynthStudy> {
    config.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        match draw(config, config.seed.wrapping_add(attempt)) {
            Err(Error::SingleClass) => continue,
            other => return other,
        }
    }
    Err(Error::Config(format!("every one of {MAX_ATTEMPTS} draws put all units in one treatment class")))
}

/// Mean `Y(1) - Y(0)` over the distinct treated units in the match set.
pub fn oracle_true_effect(study: &SynthStudy, set: &MatchSet) -> f64 {
    let mut treated: Vec<usize> = set.pairs.iter().map(|p| p.treated).collect();
    treated.sort_unstable();
    treated.dedup();
    mean(treated.into_iter().map(|i| study.effects[i]))
}

/// Word lists of the planted topics used for exported post text.
pub const PLANTED_TOPICS: [&[&str]; 3] = [
    &["salad", "chicken", "broccoli", "protein", "oats", "spinach", "lentils", "yogurt", "apple", "rice", "beans", "salmon"],
    &["running", "gym", "squats", "cardio", "lifting", "walking", "cycling", "treadmill", "sweat", "miles", "reps", "swim"],
    &["stress", "tired", "craving", "sad", "lonely", "anxious", "binge", "guilt", "hopeless", "bored", "angry", "upset"],
];

const POST_WORDS: usize = 40;
const START_TIME: f64 = 1_400_000_000.0;

/// Exports a study as corpus records. Each unit gets a self post whose text
/// is drawn from [`PLANTED_TOPICS`] with topic `k` weighted by
/// `exp(x_k)` for the first three covariates, one comment from another user per feedback count (or one for
/// treated units without feedback), up to two weekly updates, and a final
/// post whose badge shows
/// `max(Y, 0)` pounds lost, rounded to 0.1 lb.
pub fn export_records(study: &SynthStudy) -> Vec<EventRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(study.ground_truth.seed_used ^ 0x5eed_7e47);
    let mut out = Vec::new();
    for (i, id) in study.unit_ids.iter().enumerate() {
        let x = |j: usize| if j < study.x.n_cols() { study.x.get(i, j) } else { 0.0 };
        let logits = [x(0), x(1), x(2)];
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let words: Vec<&str> = (0..POST_WORDS)
            .map(|_| {
                let mut u = rng.random::<f64>() * z;
                let mut topic = 2;
                for (t, l) in logits.iter().enumerate() {
                    u -= l.exp();
                    if u < 0.0 {
                        topic = t;
                        break;
                    }
                }
                let list = PLANTED_TOPICS[topic];
                list[rng.random_range(0..list.len())]
            })
            .collect();
        let t0 = START_TIME + i as f64 * 60.0;
        let post_id = format!("p_{id}");
        out.push(EventRecord {
            event_id: post_id.clone(),
            author: id.clone(),
            kind: EventKind::SelfPost,
            parent_post_id: None,
            created_at: t0,
            title: Some(format!("starting out {id}")),
            body: Some(words.join(" ")),
            score: 1,
            badge_text: None,
        });
        let n_comments = match &study.comment_counts {
            Some(c) => c[i],
            None => u64::from(study.treatment[i]),
        };
        for c in 0..n_comments {
            out.push(EventRecord {
                event_id: format!("c_{id}_{c}"),
                author: format!("helper{}", c % 7),
                kind: EventKind::Comment,
                parent_post_id: Some(post_id.clone()),
                created_at: t0 + 600.0 * (c + 1) as f64,
                title: None,
                body: Some("you can do this".into()),
                score: 1,
                badge_text: None,
            });
        }
        for k in 0..rng.random_range(0..3u64) {
            out.push(EventRecord {
                event_id: format!("q_{id}_{k}"),
                author: id.clone(),
                kind: EventKind::SelfPost,
                parent_post_id: None,
                created_at: t0 + (k + 1) as f64 * 7.0 * SECONDS_PER_DAY,
                title: Some("week update".into()),
                body: Some("still going".into()),
                score: 1,
                badge_text: None,
            });
        }
        let lb = (study.outcomes[i].max(0.0) * 10.0).round() / 10.0;
        out.push(EventRecord {
            event_id: format!("f_{id}"),
            author: id.clone(),
            kind: EventKind::SelfPost,
            parent_post_id: None,
            created_at: t0 + 30.0 * SECONDS_PER_DAY,
            title: Some("progress".into()),
            body: Some("checking in".into()),
            score: 1,
            badge_text: Some(format!("{lb:.1} lbs / {:.3} kg", lb * LB_TO_KG)),
        });
    }
    out
}
