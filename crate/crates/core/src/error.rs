use std::path::PathBuf;

/// Errors produced by the WLDA library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("cannot parse {value:?} at row {row}, column {column:?} as a number")]
    Parse { row: usize, column: String, value: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid missingness spec: {0}")]
    InvalidSpec(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("class {class} has no observed values for feature {feature}")]
    EmptyCell { class: usize, feature: usize },

    #[error("feature {feature} has {observed} observed values; at least 2 are required")]
    TooFewObservations { feature: usize, observed: usize },

    #[error("feature {feature} has zero pooled variance; jitter or remove it")]
    DegenerateVariance { feature: usize },

    #[error("only {m} overlapping observations; at least 2 are required")]
    InsufficientPairs { m: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid class id {class} (model has {n_classes} classes)")]
    InvalidClass { class: usize, n_classes: usize },

    #[error("exact Shapley enumeration supports at most {limit} features, got {p}; use a sampling estimator")]
    TooManyFeatures { p: usize, limit: usize },

    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
