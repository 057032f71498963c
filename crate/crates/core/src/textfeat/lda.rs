//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;
const INFER_SWEEPS: usize = 100;
const INFER_BURN_IN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self { topics: 20, iterations: 2000, alpha: 0.4, beta: 0.1, seed: 0 }
    }
}

impl LdaParams {
    fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::invalid("topic model needs at least 2 topics"));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::invalid("alpha and beta must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    format_version: u32,
    params: LdaParams,
    vocabulary: Vec<String>,
    /// K rows of length V, each a probability distribution over words.
    topic_word: Vec<Vec<f64>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TopicModel {
    pub fn topics(&self) -> usize {
        self.params.topics
    }

    pub fn params(&self) -> &LdaParams {
        &self.params
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn topic_word(&self) -> &[Vec<f64>] {
        &self.topic_word
    }

    pub fn word_index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: TopicModel = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported topic model format version {}",
                model.format_version
            )));
        }
        model.params.validate()?;
        let v = model.vocabulary.len();
        if model.topic_word.len() != model.params.topics || model.topic_word.iter().any(|r| r.len() != v) {
            return Err(Error::invalid("topic model matrix does not match its vocabulary"));
        }
        model.index = index_of(&model.vocabulary);
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn index_of(vocabulary: &[String]) -> HashMap<String, usize> {
    vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect()
}

/// Draws an index from unnormalised weights.
fn draw(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return k;
        }
    }
    weights.len() - 1
}

pub fn lda_fit(documents: &[Vec<String>], params: LdaParams) -> Result<TopicModel> {
    params.validate()?;
    if documents.is_empty() {
        return Err(Error::invalid("cannot fit a topic model on an empty corpus"));
    }
    let distinct: HashSet<&Vec<String>> = documents.iter().filter(|d| !d.is_empty()).collect();
    if distinct.len() < params.topics {
        return Err(Error::invalid(format!(
            "topic model with {} topics needs at least as many distinct documents, found {}",
            params.topics,
            distinct.len()
        )));
    }
    let vocabulary: Vec<String> = documents
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocabulary.is_empty() {
        return Err(Error::invalid("vocabulary is empty"));
    }
    let index = index_of(&vocabulary);
    let docs: Vec<Vec<usize>> = documents
        .iter()
        .map(|d| d.iter().map(|t| index[t]).collect())
        .collect();

    let k_topics = params.topics;
    let v = vocabulary.len();
    let v_beta = v as f64 * params.beta;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // word-major counts: word_topic[w * K + k]
    let mut word_topic = vec![0u32; v * k_topics];
    let mut topic_total = vec![0u32; k_topics];
    let mut doc_topic = vec![vec![0u32; k_topics]; docs.len()];
    let mut assignment: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let z: Vec<usize> = doc.iter().map(|_| rng.random_range(0..k_topics)).collect();
        for (&w, &k) in doc.iter().zip(&z) {
            word_topic[w * k_topics + k] += 1;
            topic_total[k] += 1;
            doc_topic[d][k] += 1;
        }
        assignment.push(z);
    }

    let mut weights = vec![0.0; k_topics];
    for _ in 0..params.iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = assignment[d][i];
                word_topic[w * k_topics + old] -= 1;
                topic_total[old] -= 1;
                doc_topic[d][old] -= 1;

                let row = &word_topic[w * k_topics..(w + 1) * k_topics];
                let mut total = 0.0;
                for k in 0..k_topics {
                    let p = (doc_topic[d][k] as f64 + params.alpha) * (row[k] as f64 + params.beta)
                        / (topic_total[k] as f64 + v_beta);
                    weights[k] = p;
                    total += p;
                }
                let new = draw(&mut rng, &weights, total);

                assignment[d][i] = new;
                word_topic[w * k_topics + new] += 1;
                topic_total[new] += 1;
                doc_topic[d][new] += 1;
            }
        }
    }

    let topic_word = (0..k_topics)
        .map(|k| {
            let mut row: Vec<f64> = (0..v)
                .map(|w| word_topic[w * k_topics + k] as f64 + params.beta)
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
            row
        })
        .collect();

    Ok(TopicModel { format_version: FORMAT_VERSION, params, vocabulary, topic_word, index })
}

/// Topic proportions of one document with the topic-word matrix held fixed.
///
/// Documents with no in-vocabulary token get the uniform vector.
pub fn lda_infer(model: &TopicModel, tokens: &[String]) -> Vec<f64> {
    let k_topics = model.topics();
    let words: Vec<usize> = tokens.iter().filter_map(|t| model.word_index(t)).collect();
    if words.is_empty() {
        return vec![1.0 / k_topics as f64; k_topics];
    }
    let alpha = model.params.alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(model.params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut z: Vec<usize> = words.iter().map(|_| rng.random_range(0..k_topics)).collect();
    let mut counts = vec![0u32; k_topics];
    z.iter().for_each(|&k| counts[k] += 1);

    let n = words.len() as f64;
    let denom = n + k_topics as f64 * alpha;
    let mut theta = vec![0.0; k_topics];
    let mut weights = vec![0.0; k_topics];
    for sweep in 0..INFER_SWEEPS {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            let mut total = 0.0;
            for k in 0..k_topics {
                let p = (counts[k] as f64 + alpha) * model.topic_word[k][w];
                weights[k] = p;
                total += p;
            }
            z[i] = draw(&mut rng, &weights, total);
            counts[z[i]] += 1;
        }
        if sweep >= INFER_BURN_IN {
            for k in 0..k_topics {
                theta[k] += (counts[k] as f64 + alpha) / denom;
            }
        }
    }
    let sum: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= sum);
    theta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(n: usize) -> Vec<Vec<String>> {
        (0..n)
            .map(|i| {
                let words = if i % 2 == 0 { ["apple", "pear", "plum"] } else { ["run", "lift", "swim"] };
                words.iter().cycle().skip(i % 3).take(6).map(|s| s.to_string()).collect()
            })
            .collect()
    }

    fn params() -> LdaParams {
        LdaParams { topics: 2, iterations: 50, alpha: 0.4, beta: 0.1, seed: 3 }
    }

    #[test]
    fn rows_are_distributions() {
        let m = lda_fit(&docs(10), params()).unwrap();
        for row in m.topic_word() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn deterministic_fit() {
        let a = lda_fit(&docs(10), params()).unwrap();
        let b = lda_fit(&docs(10), params()).unwrap();
        assert_eq!(a.topic_word(), b.topic_word());
    }

    #[test]
    fn empty_and_too_small_corpora() {
        assert!(lda_fit(&[], params()).is_err());
        assert!(lda_fit(&[vec![], vec![]], params()).is_err());
        let same = vec![vec!["a".to_string()]; 5];
        assert!(lda_fit(&same, params()).is_err());
        assert!(lda_fit(&docs(4), LdaParams { topics: 1, ..params() }).is_err());
    }

    #[test]
    fn unseen_document_is_uniform() {
        let m = lda_fit(&docs(10), params()).unwrap();
        assert_eq!(lda_infer(&m, &["zzz".to_string()]), vec![0.5, 0.5]);
        assert_eq!(lda_infer(&m, &[]), vec![0.5, 0.5]);
    }

    #[test]
    fn json_round_trip() {
        let m = lda_fit(&docs(10), params()).unwrap();
        let back = TopicModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.topic_word(), m.topic_word());
        assert_eq!(back.word_index("plum"), m.word_index("plum"));
        let doc: Vec<String> = vec!["plum".into(), "swim".into()];
        assert_eq!(lda_infer(&back, &doc), lda_infer(&m, &doc));
    }
}
