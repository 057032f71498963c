//! Matching-based causal effect estimation for observational data from
//! online communities.
//!
//! The pipeline runs in stages: build a cohort from event timelines
//! ([`corpus`]), featurise each first post ([`textfeat`]), select covariates
//! with an L1-penalised logistic model ([`selector`]), match treated units to
//! similar controls under a caliper ([`matcher`]), then check balance and
//! estimate effects ([`diagnostics`]). [`synthgen`] builds studies with known
//! ground truth for validating all of the above.

pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod matcher;
pub mod pipeline;
pub mod selector;
pub mod synthgen;
pub mod textfeat;

pub use error::{Error, Result};
