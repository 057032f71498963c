use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("line {line}: duplicate event id `{event_id}`")]
    DuplicateEvent { line: usize, event_id: String },

    #[error("treatment cutoff {cutoff} on {variable} leaves the {empty} group empty")]
    EmptyTreatmentGroup {
        variable: String,
        cutoff: i64,
        empty: &'static str,
    },

    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },

    #[error("labels contain a single class; both treated and control units are required")]
    SingleClass,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("model has no nonzero coefficients; refit with a smaller lambda")]
    EmptySelection,

    #[error("no treated unit reaches caliper {caliper}; try a lower caliper")]
    NoMatches { caliper: f64 },

    #[error("pair ({treated}, {control}) has control outcome 0; percent effect is undefined")]
    ZeroControlOutcome { treated: String, control: String },

    #[error("outcome missing for unit {unit}")]
    MissingOutcome { unit: String },

    #[error("pooled variance is zero while means differ ({treated_mean} vs {control_mean})")]
    DegenerateVariance { treated_mean: f64, control_mean: f64 },

    #[error("caliper sweep {start}..={stop} ended without meeting the balance and sample-size conditions")]
    SweepExhausted { start: f64, stop: f64 },

    #[error("{0}")]
    InvalidInput(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{artifact} not found at {path}; run the `{stage}` stage first")]
    MissingArtifact {
        artifact: &'static str,
        stage: &'static str,
        path: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
