//! Command-line front end: one subcommand per stage, artifacts on disk
//! between stages, and a manifest recording the resolved config and seeds.

pub mod artifacts;
pub mod config;
mod stages;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::PipelineConfig;
pub use stages::Stage;

use crate::corpus::TreatmentVariable;
use crate::error::{Error, Result};
use crate::matcher::CaliperGrid;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CONDITIONS_NOT_MET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "matchcause", version, about = "Matching-based effect estimation for online community data")]
pub struct Cli {
    /// TOML config file; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// `comments` or `score`
    #[arg(long, global = true)]
    pub treatment_variable: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub cutoff: Option<i64>,
    #[arg(long, global = true)]
    pub include_self_comments: bool,
    /// Comma-separated penalties.
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub cv_folds: Option<usize>,
    #[arg(long, global = true)]
    pub cv_seed: Option<u64>,
    #[arg(long, global = true)]
    pub sparsity_tolerance: Option<f64>,
    /// Fixed caliper instead of a sweep.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub caliper: Option<f64>,
    /// `start:step:stop`
    #[arg(long, global = true)]
    pub caliper_sweep: Option<String>,
    #[arg(long, global = true)]
    pub min_pairs: Option<usize>,
    #[arg(long, global = true)]
    pub permutations: Option<usize>,
    #[arg(long, global = true)]
    pub perm_seed: Option<u64>,
    /// `global` or `paired`
    #[arg(long, global = true)]
    pub perm_mode: Option<String>,
    /// `eate`, `absdiff` or `median-ratio`
    #[arg(long, global = true)]
    pub statistic: Option<String>,
    #[arg(long, global = true)]
    pub topics: Option<usize>,
    #[arg(long, global = true)]
    pub lda_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub lda_seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the event corpus and report record counts.
    Ingest,
    /// Build the analysed cohort with treatment labels and outcomes.
    Cohort,
    /// Fit the topic model and write the standardised feature matrix.
    Features,
    /// Cross-validate the L1 logistic model and select covariates.
    Select,
    /// Match treated units to controls (caliper sweep unless fixed).
    Match,
    /// Standardised mean differences before and after matching.
    Balance,
    /// Effect estimate and permutation p-value on the match set.
    Effect,
    /// Sobel mediation tests on the match set.
    Mediate,
    /// Generate a synthetic study in place of the cohort and features stages.
    Synth {
        /// Also write the study as an event corpus (JSON lines).
        #[arg(long)]
        export_events: Option<PathBuf>,
    },
    /// Run every stage in order.
    Pipeline {
        /// Start at this stage, reusing the artifacts of earlier stages.
        #[arg(long, value_enum)]
        from: Option<Stage>,
        /// Replay the config and stages recorded in a manifest.
        #[arg(long, conflicts_with = "from")]
        manifest: Option<PathBuf>,
    },
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        if let Some(p) = &self.output_dir {
            cfg.output_dir = p.clone();
        }
        if let Some(v) = &self.treatment_variable {
            cfg.treatment.variable = match v.as_str() {
                "comments" | "comment-count" => TreatmentVariable::CommentCount,
                "score" => TreatmentVariable::Score,
                other => return Err(Error::Config(format!("unknown treatment variable `{other}`"))),
            };
        }
        if let Some(c) = self.cutoff {
            cfg.treatment.cutoff = c;
        }
        if self.include_self_comments {
            cfg.treatment.include_self_comments = true;
        }
        if let Some(g) = &self.lambda_grid {
            cfg.selector.lambda_grid = Some(g.clone());
        }
        if let Some(f) = self.cv_folds {
            cfg.selector.folds = f;
        }
        if let Some(s) = self.cv_seed {
            cfg.selector.seed = s;
        }
        if let Some(t) = self.sparsity_tolerance {
            cfg.selector.sparsity_tolerance = t;
        }
        if let Some(c) = self.caliper {
            cfg.matcher.caliper = Some(c);
        }
        if let Some(s) = &self.caliper_sweep {
            CaliperGrid::parse(s)?;
            cfg.matcher.sweep = s.clone();
            cfg.matcher.caliper = None;
        }
        if let Some(m) = self.min_pairs {
            cfg.matcher.min_pairs = m;
        }
        if let Some(n) = self.permutations {
            cfg.diagnostics.permutations = n;
        }
        if let Some(s) = self.perm_seed {
            cfg.diagnostics.seed = s;
        }
        if let Some(m) = &self.perm_mode {
            cfg.diagnostics.mode = m.parse()?;
        }
        if let Some(s) = &self.statistic {
            cfg.diagnostics.statistic = s.parse()?;
        }
        if let Some(k) = self.topics {
            cfg.features.topics = k;
        }
        if let Some(i) = self.lda_iterations {
            cfg.features.iterations = i;
        }
        if let Some(s) = self.lda_seed {
            cfg.features.seed = s;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub lda: u64,
    pub cross_validation: u64,
    pub permutation: u64,
    pub synth: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub stages: Vec<Stage>,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_hash: String,
    pub seeds: Seeds,
    pub config: PipelineConfig,
    /// Artifact file name to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
    /// Wall-clock time of the run; the only non-reproducible field.
    pub created_unix: u64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest {}: {e}", path.display())))
    }
}

const ALL_ARTIFACTS: [&str; 14] = [
    artifacts::INGEST,
    artifacts::COHORT,
    artifacts::COHORT_SUMMARY,
    artifacts::FEATURES,
    artifacts::FEATURE_SCHEMA,
    artifacts::TOPIC_MODEL,
    artifacts::SELECTION,
    artifacts::COEFFICIENTS,
    artifacts::MATCHES,
    artifacts::MATCH_SUMMARY,
    artifacts::BALANCE,
    artifacts::EFFECT,
    artifacts::MEDIATION,
    artifacts::SYNTH_TRUTH,
];

fn write_manifest(cfg: &PipelineConfig, command: &str, stages: Vec<Stage>) -> Result<()> {
    let compact = serde_json::to_string(cfg)?;
    let mut artifacts_map = BTreeMap::new();
    for name in ALL_ARTIFACTS {
        let p = cfg.output_dir.join(name);
        if p.is_file() {
            artifacts_map.insert(name.to_string(), artifacts::sha256_hex(&std::fs::read(&p)?));
        }
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        stages,
        config_hash: artifacts::sha256_hex(compact.as_bytes()),
        seeds: Seeds {
            lda: cfg.features.seed,
            cross_validation: cfg.selector.seed,
            permutation: cfg.diagnostics.seed,
            synth: cfg.synth.as_ref().map(|s| s.seed),
        },
        config: cfg.clone(),
        artifacts: artifacts_map,
        created_unix: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    artifacts::write_json(&cfg.output_dir.join(artifacts::MANIFEST), &manifest)
}

fn absolutize(p: &mut PathBuf) -> Result<()> {
    *p = std::path::absolute(&*p)?;
    Ok(())
}

fn resolve_config(cli: &Cli, manifest: Option<&Manifest>) -> Result<PipelineConfig> {
    let mut cfg = match (manifest, &cli.config) {
        (Some(m), _) => m.config.clone(),
        (None, Some(path)) => PipelineConfig::load(path)?,
        (None, None) => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut cfg)?;
    if let Some(p) = cfg.input.as_mut() {
        absolutize(p)?;
    }
    absolutize(&mut cfg.output_dir)?;
    if let Some(p) = cfg.features.lexicon.as_mut() {
        absolutize(p)?;
    }
    Ok(cfg)
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let manifest = match &cli.command {
        Command::Pipeline { manifest: Some(p), .. } => Some(Manifest::load(p)?),
        _ => None,
    };
    let cfg = resolve_config(cli, manifest.as_ref())?;

    let (name, stages): (&str, Vec<Stage>) = match &cli.command {
        Command::Ingest => ("ingest", vec![Stage::Ingest]),
        Command::Cohort => ("cohort", vec![Stage::Cohort]),
        Command::Features => ("features", vec![Stage::Features]),
        Command::Select => ("select", vec![Stage::Select]),
        Command::Match => ("match", vec![Stage::Match]),
        Command::Balance => ("balance", vec![Stage::Balance]),
        Command::Effect => ("effect", vec![Stage::Effect]),
        Command::Mediate => ("mediate", vec![Stage::Mediate]),
        Command::Synth { .. } => ("synth", vec![]),
        Command::Pipeline { from, .. } => {
            let start = match (&manifest, from) {
                (Some(m), _) => m.stages.first().copied().unwrap_or(Stage::Ingest),
                (None, Some(f)) => *f,
                (None, None) => Stage::Ingest,
            };
            ("pipeline", Stage::ALL.into_iter().filter(|s| *s >= start).collect())
        }
    };
    let needs_input = stages.iter().any(|s| s.needs_input());
    cfg.validate(needs_input)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let ctx = stages::Context { cfg: &cfg, out: &cfg.output_dir };

    if let Command::Synth { export_events } = &cli.command {
        stages::synth(&ctx, export_events.as_deref())?;
    }
    for &stage in &stages {
        stages::run_stage(stage, &ctx)?;
    }
    write_manifest(&cfg, name, stages)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::MissingArtifact { .. }
        | Error::MalformedRecord { .. }
        | Error::DuplicateEvent { .. }
        | Error::Lexicon { .. } => EXIT_VALIDATION,
        Error::SweepExhausted { .. } => EXIT_CONDITIONS_NOT_MET,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
