use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lda::{lda_infer, TopicModel};
use super::lexicon::Lexicon;
use super::sentiment::SentimentAnalyzer;
use super::tokenize::{question_word_count, question_word_counts, tokenize, word_length, QUESTION_WORDS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Topic,
    Lexicon,
    Sentiment,
    Question,
    Length,
    /// Numeric covariate supplied directly rather than derived from text.
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<FeatureColumn>,
    /// Constant columns removed before standardisation.
    pub dropped: Vec<String>,
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// Dense row-major matrix with one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    unit_ids: Vec<String>,
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(unit_ids: Vec<String>, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != unit_ids.len() * n_cols {
            return Err(Error::DimensionMismatch { expected: unit_ids.len() * n_cols, found: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self { unit_ids, n_cols, data })
    }

    pub fn from_rows(unit_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch { expected: n_cols, found: bad.len() });
        }
        Self::new(unit_ids, n_cols, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0
        self.data.chunks_exact(self.n_cols.max(1)).take(self.n_rows())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> FeatureMatrix {
        let data = self.rows().flat_map(|r| columns.iter().map(move |&j| r[j])).collect();
        FeatureMatrix { unit_ids: self.unit_ids.clone(), n_cols: columns.len(), data }
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Z-scores each column with cohort statistics (sample sd), dropping
/// columns that are constant across units.
pub fn standardize(
    unit_ids: Vec<String>,
    columns: Vec<(String, FeatureKind)>,
    raw_rows: &[Vec<f64>],
) -> Result<(FeatureSchema, FeatureMatrix)> {
    if raw_rows.is_empty() {
        return Err(Error::invalid("cannot build features for an empty cohort"));
    }
    if unit_ids.len() != raw_rows.len() {
        return Err(Error::DimensionMismatch { expected: unit_ids.len(), found: raw_rows.len() });
    }
    let p = columns.len();
    if let Some(bad) = raw_rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, found: bad.len() });
    }
    if raw_rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("raw features".into()));
    }

    let mut schema = FeatureSchema::default();
    let mut kept = Vec::new();
    for (j, (name, kind)) in columns.into_iter().enumerate() {
        let col: Vec<f64> = raw_rows.iter().map(|r| r[j]).collect();
        let (mean, sd) = mean_sd(&col);
        let constant = col.iter().all(|&x| x == col[0]) || sd <= 1e-12 * mean.abs().max(1.0);
        if constant {
            schema.dropped.push(name);
        } else {
            schema.columns.push(FeatureColumn { name, kind, mean, sd });
            kept.push(j);
        }
    }
    let data = raw_rows
        .iter()
        .flat_map(|r| {
            kept.iter()
                .zip(&schema.columns)
                .map(move |(&j, c)| (r[j] - c.mean) / c.sd)
        })
        .collect();
    let matrix = FeatureMatrix::new(unit_ids, kept.len(), data)?;
    Ok((schema, matrix))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionMode {
    #[default]
    Aggregate,
    PerWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub question_mode: QuestionMode,
    pub sentiment: bool,
    pub length: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { question_mode: QuestionMode::Aggregate, sentiment: true, length: true }
    }
}

pub struct Featurizer<'a> {
    pub topics: Option<&'a TopicModel>,
    pub lexicon: &'a Lexicon,
    pub sentiment: &'a SentimentAnalyzer,
    pub options: FeatureOptions,
}

impl Featurizer<'_> {
    pub fn column_spec(&self) -> Vec<(String, FeatureKind)> {
        let mut cols = Vec::new();
        if let Some(m) = self.topics {
            cols.extend((0..m.topics()).map(|k| (format!("topic_{k:02}"), FeatureKind::Topic)));
        }
        cols.extend(self.lexicon.category_names().map(|n| (format!("lex_{n}"), FeatureKind::Lexicon)));
        if self.options.sentiment {
            cols.push(("sentiment".into(), FeatureKind::Sentiment));
        }
        match self.options.question_mode {
            QuestionMode::Aggregate => cols.push(("question_words".into(), FeatureKind::Question)),
            QuestionMode::PerWord => {
                cols.extend(QUESTION_WORDS.iter().map(|w| (format!("question_{w}"), FeatureKind::Question)))
            }
        }
        if self.options.length {
            cols.push(("length".into(), FeatureKind::Length));
        }
        cols
    }

    /// Unstandardised feature values for one post, aligned to [`Self::column_spec`].
    pub fn raw_features(&self, text: &str) -> Vec<f64> {
        let tokens = tokenize(text);
        let mut row = Vec::new();
        if let Some(m) = self.topics {
            row.extend(lda_infer(m, &tokens));
        }
        row.extend(self.lexicon.proportions(&tokens));
        if self.options.sentiment {
            row.push(self.sentiment.score(text));
        }
        match self.options.question_mode {
            QuestionMode::Aggregate => row.push(question_word_count(&tokens) as f64),
            QuestionMode::PerWord => row.extend(question_word_counts(&tokens).map(|c| c as f64)),
        }
        if self.options.length {
            row.push(word_length(text) as f64);
        }
        row
    }
}

/// Featurises `(unit id, post text)` pairs and standardises the result.
pub fn build_feature_matrix(
    posts: &[(String, String)],
    featurizer: &Featurizer<'_>,
) -> Result<(FeatureSchema, FeatureMatrix)> {
    if posts.is_empty() {
        return Err(Error::invalid("cannot build features for an empty cohort"));
    }
    let raw: Vec<Vec<f64>> = posts.par_iter().map(|(_, text)| featurizer.raw_features(text)).collect();
    let ids = posts.iter().map(|(id, _)| id.clone()).collect();
    standardize(ids, featurizer.column_spec(), &raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textfeat::lda::{lda_fit, LdaParams};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn standardized_columns() {
        let rows = vec![vec![1.0, 5.0, 2.0], vec![2.0, 5.0, 4.0], vec![4.0, 5.0, 9.0], vec![0.5, 5.0, 1.0]];
        let cols = vec![
            ("a".to_string(), FeatureKind::Covariate),
            ("const".to_string(), FeatureKind::Covariate),
            ("b".to_string(), FeatureKind::Covariate),
        ];
        let (schema, m) = standardize(ids(4), cols, &rows).unwrap();
        assert_eq!(schema.names(), ["a", "b"]);
        assert_eq!(schema.dropped, ["const"]);
        for j in 0..m.n_cols() {
            let (mean, sd) = mean_sd(&m.column(j));
            assert!(mean.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_with_rounding_noise_dropped() {
        let rows: Vec<Vec<f64>> = (0..7).map(|_| vec![0.1, 0.0]).collect();
        let (schema, _) = standardize(
            ids(7),
            vec![("x".into(), FeatureKind::Lexicon), ("y".into(), FeatureKind::Lexicon)],
            &rows,
        )
        .unwrap();
        assert!(schema.is_empty());
        assert_eq!(schema.dropped.len(), 2);
    }

    #[test]
    fn empty_cohort_errors() {
        let lex = Lexicon::parse("a: x").unwrap();
        let s = SentimentAnalyzer::default();
        let f = Featurizer { topics: None, lexicon: &lex, sentiment: &s, options: FeatureOptions::default() };
        assert!(build_feature_matrix(&[], &f).is_err());
    }

    #[test]
    fn raw_length_and_layout() {
        let lex = Lexicon::parse("a: x").unwrap();
        let s = SentimentAnalyzer::default();
        let f = Featurizer { topics: None, lexicon: &lex, sentiment: &s, options: FeatureOptions::default() };
        let raw = f.raw_features("a b c");
        assert_eq!(f.column_spec().len(), raw.len());
        assert_eq!(*raw.last().unwrap(), 3.0);
        let per_word = Featurizer { options: FeatureOptions { question_mode: QuestionMode::PerWord, ..f.options }, ..f };
        assert_eq!(per_word.raw_features("why why how").len(), 1 + 1 + 8 + 1);
    }

    #[test]
    fn full_featurisation_is_repeatable() {
        let texts = ["I love running every day", "why is my diet failing, how do I fix it",
            "new here, what should I eat", "lost 20 lbs so happy", "stressed and mad at my job"];
        let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
        let model = lda_fit(&docs, LdaParams { topics: 2, iterations: 30, seed: 1, ..LdaParams::default() }).unwrap();
        let lex = Lexicon::parse("anger: mad* hate\nwork: job* boss").unwrap();
        let s = SentimentAnalyzer::default();
        let f = Featurizer { topics: Some(&model), lexicon: &lex, sentiment: &s, options: FeatureOptions::default() };
        let posts: Vec<(String, String)> = texts.iter().enumerate().map(|(i, t)| (format!("u{i}"), t.to_string())).collect();
        let (s1, m1) = build_feature_matrix(&posts, &f).unwrap();
        let (s2, m2) = build_feature_matrix(&posts, &f).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(m1, m2);
        assert_eq!(m1.unit_ids()[3], "u3");
    }

    #[test]
    fn select_columns_keeps_order() {
        let m = FeatureMatrix::from_rows(ids(2), &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = m.select_columns(&[2, 0]);
        assert_eq!(s.row(1), &[6.0, 4.0]);
        assert!(FeatureMatrix::from_rows(ids(2), &[vec![1.0], vec![f64::NAN]]).is_err());
    }
}
