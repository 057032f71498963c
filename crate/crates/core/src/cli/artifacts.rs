//! Stage artifacts on disk: tab-separated tables and pretty JSON.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const INGEST: &str = "ingest.json";
pub const COHORT: &str = "cohort.tsv";
pub const COHORT_SUMMARY: &str = "cohort_summary.json";
pub const FEATURES: &str = "features.tsv";
pub const FEATURE_SCHEMA: &str = "feature_schema.json";
pub const TOPIC_MODEL: &str = "topic_model.json";
pub const SELECTION: &str = "selection.json";
pub const COEFFICIENTS: &str = "coefficients.tsv";
pub const MATCHES: &str = "matches.tsv";
pub const MATCH_SUMMARY: &str = "match_summary.json";
pub const BALANCE: &str = "balance.tsv";
pub const EFFECT: &str = "effect.json";
pub const MEDIATION: &str = "mediation.tsv";
pub const SYNTH_TRUTH: &str = "synth_truth.json";
pub const MANIFEST: &str = "manifest.json";

const MISSING: &str = "NA";

/// Shortest round-trip decimal; `NA` for NaN.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() { MISSING.to_string() } else { v.to_string() }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), fmt_f64)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Where an artifact comes from, for "run stage X first" errors.
#[derive(Debug, Clone, Copy)]
pub struct Source {
    pub artifact: &'static str,
    pub stage: &'static str,
}

pub const COHORT_SRC: Source = Source { artifact: "cohort table", stage: "cohort" };
pub const FEATURES_SRC: Source = Source { artifact: "feature matrix", stage: "features" };
pub const SELECTION_SRC: Source = Source { artifact: "selection report", stage: "select" };
pub const MATCHES_SRC: Source = Source { artifact: "match set", stage: "match" };

pub fn require(path: &Path, src: Source) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingArtifact { artifact: src.artifact, stage: src.stage, path: path.display().to_string() })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path, src: Source) -> Result<T> {
    require(path, src)?;
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path, src: Source) -> Result<Self> {
        require(path, src)?;
        let mut r = csv::ReaderBuilder::new().delimiter(b'\t').from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("table has no column `{name}`")))
    }

    pub fn strings(&self, name: &str) -> Result<Vec<&str>> {
        let j = self.position(name)?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    /// Numeric column; `NA` reads as NaN.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        self.strings(name)?
            .into_iter()
            .map(|s| {
                if s == MISSING {
                    Ok(f64::NAN)
                } else {
                    s.parse::<f64>().map_err(|_| Error::invalid(format!("column `{name}`: `{s}` is not a number")))
                }
            })
            .collect()
    }

    /// 0/1 column.
    pub fn flags(&self, name: &str) -> Result<Vec<bool>> {
        self.strings(name)?
            .into_iter()
            .map(|s| match s {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(Error::invalid(format!("column `{name}`: expected 0 or 1, got `{other}`"))),
            })
            .collect()
    }

}
