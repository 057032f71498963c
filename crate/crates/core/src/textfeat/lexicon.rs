//! Category lexicons in the plain text format
//!
//! ```text
//! # comment
//! anger: mad* furious hate
//! work: job office boss
//! ```
//!
//! An entry ending in `*` matches every token with that prefix.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexiconEntry {
    Word(String),
    Prefix(String),
}

impl LexiconEntry {
    pub fn matches(&self, token: &str) -> bool {
        match self {
            LexiconEntry::Word(w) => w == token,
            LexiconEntry::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    categories: Vec<(String, Vec<LexiconEntry>)>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lexicon = Lexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| Error::Lexicon { line: line_no, message };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, rest) = line
                .split_once(':')
                .ok_or_else(|| err("expected `category: entries`".into()))?;
            let name = name.trim();
            if name.is_empty() {
                return Err(err("empty category name".into()));
            }
            if lexicon.categories.iter().any(|(n, _)| n == name) {
                return Err(err(format!("duplicate category `{name}`")));
            }
            let mut entries = Vec::new();
            for word in rest.split_whitespace() {
                let word = word.to_lowercase();
                let entry = match word.find('*') {
                    None => LexiconEntry::Word(word),
                    Some(pos) if pos + 1 == word.len() && pos > 0 => {
                        LexiconEntry::Prefix(word[..pos].to_string())
                    }
                    Some(_) => return Err(err(format!("wildcard must end a non-empty stem: `{word}`"))),
                };
                entries.push(entry);
            }
            if entries.is_empty() {
                return Err(err(format!("category `{name}` has no entries")));
            }
            lexicon.categories.push((name.to_string(), entries));
        }
        Ok(lexicon)
    }

    /// The bundled categories: negative emotions, anger, sexual, reward, work.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../data/lexicon.txt")).expect("bundled lexicon parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Share of tokens matching each category, in file order.
    pub fn proportions(&self, tokens: &[String]) -> Vec<f64> {
        if tokens.is_empty() {
            return vec![0.0; self.categories.len()];
        }
        let n = tokens.len() as f64;
        self.categories
            .iter()
            .map(|(_, entries)| {
                let hits = tokens.iter().filter(|t| entries.iter().any(|e| e.matches(t))).count();
                hits as f64 / n
            })
            .collect()
    }
}

/// Category name to proportion of matching tokens.
pub fn lexicon_counts(tokens: &[String], lexicon: &Lexicon) -> Vec<(String, f64)> {
    lexicon
        .category_names()
        .map(str::to_string)
        .zip(lexicon.proportions(tokens))
        .collect()
}
