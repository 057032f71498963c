use serde::{Deserialize, Serialize};

use super::{BadgeParser, Corpus, EventKind, UserTimeline, SECONDS_PER_DAY};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CohortLabel {
    G1,
    G2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightLossMode {
    /// Last badge value seen in the timeline.
    #[default]
    Last,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreatmentVariable {
    #[serde(alias = "comments")]
    CommentCount,
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentRule {
    pub variable: TreatmentVariable,
    pub cutoff: i64,
}

#[derive(Debug, Clone, Default)]
pub struct OutcomeOptions {
    /// Count the poster's own replies as feedback on their first post.
    pub include_self_comments: bool,
    pub weight_loss_mode: WeightLossMode,
    pub badges: BadgeParser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyUnit {
    pub user: String,
    pub first_post_id: String,
    pub treatment: bool,
    pub comment_count: u64,
    pub score: i64,
    pub returned: bool,
    pub weight_loss_lb: Option<f64>,
    pub lifespan_days: u64,
    pub activity_count: u64,
    pub loss_rate_lb_per_day: Option<f64>,
    pub badge_update_count: u64,
}

impl StudyUnit {
    pub fn treatment_value(&self, variable: TreatmentVariable) -> i64 {
        match variable {
            TreatmentVariable::CommentCount => self.comment_count as i64,
            TreatmentVariable::Score => self.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub label: CohortLabel,
    pub units: Vec<StudyUnit>,
    /// Set once treatment labels have been assigned.
    pub rule: Option<TreatmentRule>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.units.iter().map(|u| u.treatment).collect()
    }

    pub fn n_treated(&self) -> usize {
        self.units.iter().filter(|u| u.treatment).count()
    }
}

/// Builds the unit for a timeline whose first event is the user's first post.
pub fn compute_outcomes(timeline: &UserTimeline<'_>, corpus: &Corpus, opts: &OutcomeOptions) -> StudyUnit {
    let first = timeline.events[0];
    let last = timeline.events[timeline.events.len() - 1];

    let comment_count = corpus
        .comments_on(&first.event_id)
        .filter(|c| opts.include_self_comments || c.author != first.author)
        .count() as u64;

    let lifespan_days = ((last.created_at - first.created_at) / SECONDS_PER_DAY)
        .floor()
        .max(0.0) as u64;

    let snapshots = &timeline.badge_snapshots;
    let weight_loss_lb = match opts.weight_loss_mode {
        WeightLossMode::Last => snapshots.last().map(|s| s.1),
        WeightLossMode::Max => snapshots.iter().map(|s| s.1).reduce(f64::max),
    };
    let loss_rate_lb_per_day = match weight_loss_lb {
        Some(lb) if lifespan_days > 0 => Some(lb / lifespan_days as f64),
        _ => None,
    };
    let badge_update_count = snapshots.windows(2).filter(|w| w[0].1 != w[1].1).count() as u64;

    StudyUnit {
        user: timeline.user.to_string(),
        first_post_id: first.event_id.clone(),
        treatment: false,
        comment_count,
        score: first.score,
        returned: timeline.events.len() > 1,
        weight_loss_lb,
        lifespan_days,
        activity_count: timeline.events.len() as u64,
        loss_rate_lb_per_day,
        badge_update_count,
    }
}

/// Users whose earliest recorded event is a self post.
pub fn select_group1(corpus: &Corpus, opts: &OutcomeOptions) -> Cohort {
    let units = corpus
        .users()
        .filter_map(|user| {
            let timeline = corpus.timeline(user, &opts.badges)?;
            (timeline.events.first()?.kind == EventKind::SelfPost)
                .then(|| compute_outcomes(&timeline, corpus, opts))
        })
        .collect();
    Cohort { label: CohortLabel::G1, units, rule: None }
}

/// Group 1 users who came back after their first post and carry a badge.
pub fn select_group2(g1: &Cohort) -> Cohort {
    let units = g1
        .units
        .iter()
        .filter(|u| u.returned && u.weight_loss_lb.is_some_and(f64::is_finite))
        .cloned()
        .collect();
    Cohort { label: CohortLabel::G2, units, rule: g1.rule }
}

pub fn assign_treatment(cohort: &Cohort, rule: TreatmentRule) -> Result<Cohort> {
    let mut out = cohort.clone();
    for unit in &mut out.units {
        unit.treatment = unit.treatment_value(rule.variable) >= rule.cutoff;
    }
    let treated = out.n_treated();
    let empty = if treated == 0 {
        Some("treated")
    } else if treated == out.len() {
        Some("control")
    } else {
        None
    };
    if let Some(empty) = empty {
        return Err(Error::EmptyTreatmentGroup {
            variable: format!("{:?}", rule.variable),
            cutoff: rule.cutoff,
            empty,
        });
    }
    out.rule = Some(rule);
    Ok(out)
}
