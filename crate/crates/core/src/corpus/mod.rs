//! Event ingestion, per-user timelines and study cohorts.
//!
//! Input is JSON Lines, one [`EventRecord`] per line. Once built, a
//! [`Corpus`] is immutable and can be shared freely across threads.

mod badge;
mod cohort;

pub use badge::{parse_inline_weight, BadgeParser, BadgeReading, InlineWeights, LB_TO_KG};
pub use cohort::{
    assign_treatment, compute_outcomes, select_group1, select_group2, Cohort, CohortLabel,
    OutcomeOptions, StudyUnit, TreatmentRule, TreatmentVariable, WeightLossMode,
};

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SelfPost,
    LinkPost,
    Comment,
}

impl EventKind {
    pub fn is_post(self) -> bool {
        matches!(self, EventKind::SelfPost | EventKind::LinkPost)
    }
}

/// One post or comment as captured from the community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub event_id: String,
    pub author: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_post_id: Option<String>,
    /// UTC seconds.
    pub created_at: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default)]
    pub score: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub badge_text: Option<String>,
}

impl EventRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if !self.created_at.is_finite() {
            return Err("created_at is not finite".into());
        }
        if self.event_id.is_empty() {
            return Err("event_id is empty".into());
        }
        match self.kind {
            EventKind::Comment if self.parent_post_id.is_none() => {
                Err("comment without parent_post_id".into())
            }
            EventKind::SelfPost if blank(&self.title) && blank(&self.body) => {
                Err("self_post with neither title nor body".into())
            }
            _ => Ok(()),
        }
    }

    /// Title and body joined by a newline, skipping absent parts.
    pub fn text(&self) -> String {
        match (&self.title, &self.body) {
            (Some(t), Some(b)) => format!("{t}\n{b}"),
            (Some(t), None) => t.clone(),
            (None, Some(b)) => b.clone(),
            (None, None) => String::new(),
        }
    }

    fn order_key(&self) -> (f64, &str) {
        (self.created_at, self.event_id.as_str())
    }
}

fn blank(s: &Option<String>) -> bool {
    s.as_deref().is_none_or(|s| s.trim().is_empty())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KindCounts {
    pub self_posts: usize,
    pub link_posts: usize,
    pub comments: usize,
}

impl KindCounts {
    pub fn posts(&self) -> usize {
        self.self_posts + self.link_posts
    }

    pub fn total(&self) -> usize {
        self.posts() + self.comments
    }
}

#[derive(Debug, Default)]
pub struct Corpus {
    events: Vec<EventRecord>,
    by_id: HashMap<String, usize>,
    // user -> event indices, ordered by (created_at, event_id)
    by_user: BTreeMap<String, Vec<usize>>,
    // post id -> comment indices
    by_parent: HashMap<String, Vec<usize>>,
    counts: KindCounts,
}

/// A user's events in time order, with the badge readings seen along the way.
#[derive(Debug, Clone)]
pub struct UserTimeline<'a> {
    pub user: &'a str,
    pub events: Vec<&'a EventRecord>,
    /// (timestamp, pounds lost), time ordered.
    pub badge_snapshots: Vec<(f64, f64)>,
}

/// Reads newline-delimited JSON records. Blank lines are skipped.
pub fn ingest_events<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        record
            .validate()
            .map_err(|message| Error::MalformedRecord { line: line_no, message })?;
        records.push((line_no, record));
    }
    Corpus::build(records)
}

impl Corpus {
    pub fn from_records(records: Vec<EventRecord>) -> Result<Self> {
        let mut numbered = Vec::with_capacity(records.len());
        for (i, r) in records.into_iter().enumerate() {
            r.validate()
                .map_err(|message| Error::MalformedRecord { line: i + 1, message })?;
            numbered.push((i + 1, r));
        }
        Self::build(numbered)
    }

    fn build(records: Vec<(usize, EventRecord)>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for (line, record) in records {
            if corpus.by_id.contains_key(&record.event_id) {
                return Err(Error::DuplicateEvent { line, event_id: record.event_id });
            }
            let idx = corpus.events.len();
            corpus.by_id.insert(record.event_id.clone(), idx);
            corpus.by_user.entry(record.author.clone()).or_default().push(idx);
            match record.kind {
                EventKind::SelfPost => corpus.counts.self_posts += 1,
                EventKind::LinkPost => corpus.counts.link_posts += 1,
                EventKind::Comment => {
                    corpus.counts.comments += 1;
                    if let Some(parent) = &record.parent_post_id {
                        corpus.by_parent.entry(parent.clone()).or_default().push(idx);
                    }
                }
            }
            corpus.events.push(record);
        }
        let events = &corpus.events;
        for indices in corpus.by_user.values_mut() {
            indices.sort_by(|&a, &b| {
                let (ta, ia) = events[a].order_key();
                let (tb, ib) = events[b].order_key();
                ta.total_cmp(&tb).then_with(|| ia.cmp(ib))
            });
        }
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn counts(&self) -> KindCounts {
        self.counts
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn get(&self, event_id: &str) -> Option<&EventRecord> {
        self.by_id.get(event_id).map(|&i| &self.events[i])
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(String::as_str)
    }

    pub fn comments_on<'a>(&'a self, post_id: &str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.by_parent
            .get(post_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.events[i])
    }

    pub fn timeline<'a>(&'a self, user: &str, badges: &BadgeParser) -> Option<UserTimeline<'a>> {
        let (user, indices) = self.by_user.get_key_value(user)?;
        let events: Vec<&EventRecord> = indices.iter().map(|&i| &self.events[i]).collect();
        let badge_snapshots = events
            .iter()
            .filter_map(|e| {
                let lb = badges.parse(e.badge_text.as_deref()?).pounds()?;
                Some((e.created_at, lb))
            })
            .collect();
        Some(UserTimeline { user: user.as_str(), events, badge_snapshots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(s: &str) -> Result<Corpus> {
        ingest_events(s.as_bytes())
    }

    #[test]
    fn empty_stream() {
        let c = ingest("").unwrap();
        assert_eq!(c.len(), 0);
        assert_eq!(c.counts().total(), 0);
    }

    #[test]
    fn counts_posts_and_comments() {
        let c = ingest(concat!(
            r#"{"event_id":"p1","author":"a","kind":"self_post","created_at":0,"body":"hi"}"#,
            "\n",
            r#"{"event_id":"p2","author":"b","kind":"self_post","created_at":1,"title":"yo"}"#,
            "\n\n",
            r#"{"event_id":"c1","author":"b","kind":"comment","parent_post_id":"p1","created_at":2}"#,
        ))
        .unwrap();
        assert_eq!(c.counts().posts(), 2);
        assert_eq!(c.counts().comments, 1);
        assert_eq!(c.comments_on("p1").count(), 1);
    }

    #[test]
    fn missing_created_at_names_line() {
        let err = ingest(concat!(
            r#"{"event_id":"p1","author":"a","kind":"self_post","created_at":0,"body":"hi"}"#,
            "\n",
            r#"{"event_id":"p2","author":"a","kind":"self_post","body":"hi"}"#,
        ))
        .unwrap_err();
        match err {
            Error::MalformedRecord { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("created_at"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = ingest(concat!(
            r#"{"event_id":"p1","author":"a","kind":"self_post","created_at":0,"body":"hi"}"#,
            "\n",
            r#"{"event_id":"p1","author":"b","kind":"self_post","created_at":3,"body":"hi"}"#,
        ))
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateEvent { line: 2, .. }));
    }

    #[test]
    fn comment_needs_parent() {
        let err = ingest(r#"{"event_id":"c","author":"a","kind":"comment","created_at":0}"#)
            .unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 1, .. }));
    }

    #[test]
    fn empty_self_post_rejected() {
        let err = ingest(r#"{"event_id":"p","author":"a","kind":"self_post","created_at":0,"body":"  "}"#)
            .unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { .. }));
    }

    #[test]
    fn timeline_tie_break_on_event_id() {
        let c = ingest(concat!(
            r#"{"event_id":"z","author":"a","kind":"comment","parent_post_id":"x","created_at":5}"#,
            "\n",
            r#"{"event_id":"b","author":"a","kind":"self_post","created_at":5,"body":"hi"}"#,
            "\n",
            r#"{"event_id":"a","author":"a","kind":"comment","parent_post_id":"x","created_at":9,"badge_text":"10lbs / 4.5kg"}"#,
        ))
        .unwrap();
        let t = c.timeline("a", &BadgeParser::default()).unwrap();
        let ids: Vec<_> = t.events.iter().map(|e| e.event_id.as_str()).collect();
        assert_eq!(ids, ["b", "z", "a"]);
        assert_eq!(t.badge_snapshots, vec![(9.0, 10.0)]);
    }
}
