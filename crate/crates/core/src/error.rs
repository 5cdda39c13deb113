use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the trust-score pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown column {column:?}; available columns: {available:?}")]
    UnknownColumn {
        column: String,
        available: Vec<String>,
    },

    #[error("non-numeric feature at row {row}, column {column:?}: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite feature at row {row}, column {column:?}")]
    NonFinite { row: usize, column: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("class {class} has {count} samples, at least {required} required")]
    TooFewSamples {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error("class {class} has no samples")]
    EmptyClass { class: usize },

    #[error("at least 2 classes are required, found {found}")]
    TooFewClasses { found: usize },

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("unknown label {label:?} at row {row}; valid labels: {valid:?}")]
    UnknownLabel {
        row: usize,
        label: String,
        valid: Vec<String>,
    },

    #[error("row count mismatch: expected {expected}, found {found}")]
    RowCountMismatch { expected: usize, found: usize },

    #[error("confidence {value} at row {row} is outside [0, 1]")]
    ConfidenceOutOfRange { row: usize, value: f64 },

    #[error("k-NN radius is zero; density is undefined at this query")]
    ZeroRadius,

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("every cross-validation fold was skipped")]
    NoUsableFolds,

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the failure happened during computation rather than while
    /// validating inputs.
    pub fn is_computation_failure(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::NoUsableFolds | Error::ZeroRadius
        )
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingFile { .. } => "missing_file",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::UnknownColumn { .. } => "unknown_column",
            Error::NonNumeric { .. } => "non_numeric_feature",
            Error::NonFinite { .. } => "non_finite_feature",
            Error::EmptyDataset => "empty_dataset",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::EmptyClass { .. } => "empty_class",
            Error::TooFewClasses { .. } => "too_few_classes",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::RowCountMismatch { .. } => "row_count_mismatch",
            Error::ConfidenceOutOfRange { .. } => "confidence_out_of_range",
            Error::ZeroRadius => "zero_radius",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NoUsableFolds => "no_usable_folds",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::ModelFormat(_) => "model_format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
