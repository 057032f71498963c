//! Text covariates for a first post: topic proportions, lexicon category
//! shares, sentiment, question words and length.

mod features;
mod lda;
mod lexicon;
mod sentiment;
mod tokenize;

pub use features::{
    build_feature_matrix, standardize, FeatureColumn, FeatureKind, FeatureMatrix, FeatureOptions,
    FeatureSchema, Featurizer, QuestionMode,
};
pub use lda::{lda_fit, lda_infer, LdaParams, TopicModel};
pub use lexicon::{lexicon_counts, Lexicon, LexiconEntry};
pub use sentiment::{sentiment_score, SentimentAnalyzer};
pub use tokenize::{question_word_count, question_word_counts, tokenize, word_length, QUESTION_WORDS};
