use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{TreatmentVariable, WeightLossMode};
use crate::diagnostics::{EffectStatistic, PermutationMode};
use crate::error::{Error, Result};
use crate::matcher::CaliperGrid;
use crate::synthgen::SynthConfig;
use crate::textfeat::QuestionMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortChoice {
    /// Every user whose first event is a self post.
    G1,
    /// G1 users who returned and carry a readable badge.
    G2,
}

/// Cohort table column used as the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeColumn {
    Returned,
    WeightLossLb,
    LossRateLbPerDay,
    LifespanDays,
    ActivityCount,
    BadgeUpdateCount,
}

impl OutcomeColumn {
    pub fn name(self) -> &'static str {
        match self {
            Self::Returned => "returned",
            Self::WeightLossLb => "weight_loss_lb",
            Self::LossRateLbPerDay => "loss_rate_lb_per_day",
            Self::LifespanDays => "lifespan_days",
            Self::ActivityCount => "activity_count",
            Self::BadgeUpdateCount => "badge_update_count",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreatmentSection {
    pub variable: TreatmentVariable,
    pub cutoff: i64,
    pub include_self_comments: bool,
}

impl Default for TreatmentSection {
    fn default() -> Self {
        Self { variable: TreatmentVariable::CommentCount, cutoff: 1, include_self_comments: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSection {
    pub group: CohortChoice,
    pub outcome: OutcomeColumn,
    pub weight_loss_mode: WeightLossMode,
    /// Regex with a named `lb` group (and optionally `kg`).
    pub badge_pattern: Option<String>,
}

impl Default for CohortSection {
    fn default() -> Self {
        Self { group: CohortChoice::G2, outcome: OutcomeColumn::WeightLossLb, weight_loss_mode: WeightLossMode::Last, badge_pattern: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub topics: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// Category file; the bundled lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub question_mode: QuestionMode,
    pub sentiment: bool,
    pub length: bool,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            topics: 20,
            iterations: 2000,
            alpha: 0.4,
            beta: 0.1,
            seed: 0,
            lexicon: None,
            question_mode: QuestionMode::Aggregate,
            sentiment: true,
            length: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorSection {
    /// Explicit penalties; the 50-point grid below `lambda_max` when absent.
    pub lambda_grid: Option<Vec<f64>>,
    pub folds: usize,
    pub seed: u64,
    pub sparsity_tolerance: f64,
}

impl Default for SelectorSection {
    fn default() -> Self {
        Self { lambda_grid: None, folds: 10, seed: 0, sparsity_tolerance: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherSection {
    /// Fixed caliper; overrides the sweep.
    pub caliper: Option<f64>,
    /// `start:step:stop`
    pub sweep: String,
    pub min_pairs: usize,
    /// When set, the sweep also requires a permutation p-value below this.
    pub significance_alpha: Option<f64>,
}

impl Default for MatcherSection {
    fn default() -> Self {
        Self { caliper: None, sweep: "0.9:0.005:0.995".into(), min_pairs: 1, significance_alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub statistic: EffectStatistic,
    pub permutations: usize,
    pub seed: u64,
    pub mode: PermutationMode,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self { statistic: EffectStatistic::Absdiff, permutations: 10_000, seed: 0, mode: PermutationMode::Paired }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediationSection {
    /// Cohort table columns tested as mediators of treatment on the outcome.
    pub mediators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Event records, one JSON object per line.
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub treatment: TreatmentSection,
    pub cohort: CohortSection,
    pub features: FeatureSection,
    pub selector: SelectorSection,
    pub matcher: MatcherSection,
    pub diagnostics: DiagnosticsSection,
    pub mediation: MediationSection,
    pub synth: Option<SynthConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            output_dir: PathBuf::from("out"),
            treatment: TreatmentSection::default(),
            cohort: CohortSection::default(),
            features: FeatureSection::default(),
            selector: SelectorSection::default(),
            matcher: MatcherSection::default(),
            diagnostics: DiagnosticsSection::default(),
            mediation: MediationSection::default(),
            synth: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.input.as_mut() {
            join(p);
        }
        join(&mut self.output_dir);
        if let Some(p) = self.features.lexicon.as_mut() {
            join(p);
        }
    }

    pub fn caliper_grid(&self) -> Result<CaliperGrid> {
        CaliperGrid::parse(&self.matcher.sweep)
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::Config("no input corpus configured (set `input` or pass --input)".into()))
    }

    /// Checks values and that referenced files exist. `needs_input` is false
    /// for stages that never read the corpus.
    pub fn validate(&self, needs_input: bool) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if needs_input {
            let input = self.input()?;
            if !input.is_file() {
                return Err(Error::Config(format!("input corpus {} does not exist", input.display())));
            }
        }
        if let Some(lex) = &self.features.lexicon {
            if !lex.is_file() {
                return Err(Error::Config(format!("lexicon {} does not exist", lex.display())));
            }
        }
        let f = &self.features;
        if f.topics < 2 || f.iterations == 0 {
            return bad("features.topics must be >= 2 and features.iterations >= 1");
        }
        if !(f.alpha > 0.0 && f.alpha.is_finite() && f.beta > 0.0 && f.beta.is_finite()) {
            return bad("features.alpha and features.beta must be positive");
        }
        let s = &self.selector;
        if s.folds < 2 {
            return bad("selector.folds must be at least 2");
        }
        if !(s.sparsity_tolerance >= 0.0 && s.sparsity_tolerance.is_finite()) {
            return bad("selector.sparsity_tolerance must be non-negative");
        }
        if let Some(g) = &s.lambda_grid {
            if g.is_empty() || g.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return bad("selector.lambda_grid must hold finite non-negative values");
            }
        }
        self.caliper_grid()?;
        if let Some(c) = self.matcher.caliper {
            if !(-1.0..=1.0).contains(&c) {
                return bad("matcher.caliper must lie in [-1, 1]");
            }
        }
        if let Some(a) = self.matcher.significance_alpha {
            if !(a > 0.0 && a <= 1.0) {
                return bad("matcher.significance_alpha must lie in (0, 1]");
            }
        }
        if self.diagnostics.permutations == 0 {
            return bad("diagnostics.permutations must be at least 1");
        }
        if let Some(synth) = &self.synth {
            synth.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_sections() {
        let cfg = PipelineConfig::from_toml(
            r#"
            input = "events.jsonl"
            [treatment]
            variable = "comments"
            cutoff = 2
            [matcher]
            sweep = "0.8:0.01:0.9"
            [diagnostics]
            statistic = "median-ratio"
            mode = "global"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.treatment.cutoff, 2);
        assert_eq!(cfg.treatment.variable, TreatmentVariable::CommentCount);
        assert_eq!(cfg.features.topics, 20);
        assert_eq!(cfg.diagnostics.statistic, EffectStatistic::MedianRatio);
        assert_eq!(cfg.caliper_grid().unwrap().values().len(), 11);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("[matcher]\ncalipre = 0.9").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate(true).is_err());
        assert!(cfg.validate(false).is_ok());
        cfg.matcher.sweep = "0.9:0:1".into();
        assert!(cfg.validate(false).is_err());
    }

    #[test]
    fn relative_paths_follow_config() {
        let mut cfg = PipelineConfig::from_toml("input = \"a.jsonl\"\noutput_dir = \"/abs\"").unwrap();
        cfg.rebase(Path::new("/cfg"));
        assert_eq!(cfg.input.unwrap(), Path::new("/cfg/a.jsonl"));
        assert_eq!(cfg.output_dir, Path::new("/abs"));
    }
}
