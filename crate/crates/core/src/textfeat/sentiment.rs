//! Rule-based valence scoring: a word lexicon adjusted by preceding
//! negations and intensity modifiers, squashed into [-1, 1].

use std::collections::HashMap;
use std::sync::OnceLock;

use super::tokenize::tokenize;
use crate::error::{Error, Result};

const DEFAULT_VALENCE: &str = include_str!("../../data/valence.txt");

const BOOST: f64 = 0.293;
const NEGATION_SCALAR: f64 = -0.74;
const EXCLAMATION_BOOST: f64 = 0.292;
const MAX_EXCLAMATIONS: usize = 4;
// squashing constant: score = s / sqrt(s^2 + NORMALIZER)
const NORMALIZER: f64 = 15.0;
const WINDOW: usize = 3;
const WINDOW_DECAY: [f64; WINDOW] = [1.0, 0.95, 0.9];

const NEGATIONS: &[&str] = &[
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "nowhere", "without",
    "cannot", "dont", "doesnt", "didnt", "isnt", "wasnt", "arent", "werent", "wont", "cant",
    "couldnt", "shouldnt", "wouldnt", "aint", "hardly", "rarely", "seldom",
];

const BOOSTERS: &[&str] = &[
    "very", "really", "so", "extremely", "incredibly", "super", "totally", "absolutely",
    "completely", "especially", "highly", "most", "truly", "utterly", "hugely", "quite",
];

const DAMPENERS: &[&str] = &[
    "slightly", "somewhat", "barely", "kinda", "kind", "sort", "sorta", "little", "marginally",
];

#[derive(Debug, Clone)]
pub struct SentimentAnalyzer {
    valence: HashMap<String, f64>,
}

impl Default for SentimentAnalyzer {
    fn default() -> Self {
        Self::from_valence_text(DEFAULT_VALENCE).expect("bundled valence lexicon parses")
    }
}

fn is_negation(token: &str) -> bool {
    NEGATIONS.contains(&token) || token.ends_with("n't")
}

impl SentimentAnalyzer {
    /// Parses `word valence` lines; `#` starts a comment line.
    pub fn from_valence_text(text: &str) -> Result<Self> {
        let mut valence = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(word), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Lexicon { line: i + 1, message: "expected `word valence`".into() });
            };
            let value: f64 = value.parse().map_err(|_| Error::Lexicon {
                line: i + 1,
                message: format!("bad valence `{value}`"),
            })?;
            if !value.is_finite() {
                return Err(Error::Lexicon { line: i + 1, message: "valence must be finite".into() });
            }
            valence.insert(word.to_lowercase(), value);
        }
        Ok(Self { valence })
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valence.get(token).copied()
    }

    pub fn score(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        let mut sum = 0.0;
        for (i, token) in tokens.iter().enumerate() {
            let Some(mut v) = self.valence(token) else { continue };
            if v == 0.0 {
                continue;
            }
            let mut negated = false;
            for back in 1..=WINDOW.min(i) {
                let prev = tokens[i - back].as_str();
                let decay = WINDOW_DECAY[back - 1];
                if BOOSTERS.contains(&prev) {
                    v += v.signum() * BOOST * decay;
                } else if DAMPENERS.contains(&prev) {
                    v -= v.signum() * BOOST * decay;
                } else if is_negation(prev) {
                    negated = true;
                }
            }
            if negated {
                v *= NEGATION_SCALAR;
            }
            sum += v;
        }
        if sum != 0.0 {
            let bangs = text.chars().filter(|&c| c == '!').count().min(MAX_EXCLAMATIONS);
            sum += sum.signum() * bangs as f64 * EXCLAMATION_BOOST;
        }
        sum / (sum * sum + NORMALIZER).sqrt()
    }
}

/// Score with the bundled valence lexicon.
pub fn sentiment_score(text: &str) -> f64 {
    static DEFAULT: OnceLock<SentimentAnalyzer> = OnceLock::new();
    DEFAULT.get_or_init(SentimentAnalyzer::default).score(text)
}
