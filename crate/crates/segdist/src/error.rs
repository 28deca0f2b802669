//! Error types shared across the crate.

use thiserror::Error;

/// Rejections produced while validating clouds, predictions, and configs.
#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("cloud has {positions} positions but {labels} ground-truth labels")]
    LabelLengthMismatch { positions: usize, labels: usize },

    #[error("cloud must contain at least one point")]
    EmptyCloud,

    #[error("non-finite coordinate at point {index}")]
    NonFiniteCoordinate { index: usize },

    #[error("model '{model}' has {got} predictions but the cloud has {expected} points")]
    LengthMismatch {
        model: String,
        expected: usize,
        got: usize,
    },

    #[error("label {label} at point {index} is outside the declared {n_classes} classes")]
    UnknownClass {
        label: u32,
        index: usize,
        n_classes: usize,
    },

    #[error("class '{class}' has no distance threshold")]
    MissingThreshold { class: String },

    #[error("threshold for class '{class}' must be finite and positive, got {value}")]
    InvalidThreshold { class: String, value: f64 },

    #[error("probability row {row} of model '{model}' is not a distribution: {reason}")]
    InvalidDistribution {
        model: String,
        row: usize,
        reason: String,
    },

    #[error("probability matrix of model '{model}' has {got} rows, expected {expected}")]
    ProbabilityShape {
        model: String,
        expected: usize,
        got: usize,
    },

    #[error("model '{model}' has probability columns for {got} classes, expected {expected}")]
    ProbabilityClassCount {
        model: String,
        expected: usize,
        got: usize,
    },

    #[error("duplicate model name '{0}'")]
    DuplicateModel(String),

    #[error("at least one model is required")]
    NoModels,

    #[error("scope mask has {got} entries but the cloud has {expected} points")]
    ScopeLengthMismatch { expected: usize, got: usize },

    #[error("config declares no classes")]
    NoClasses,

    #[error("duplicate class name '{0}'")]
    DuplicateClassName(String),

    #[error("class name '{0}' is empty or contains a delimiter character")]
    InvalidClassName(String),

    #[error("thresholds name unknown class '{0}'")]
    UnknownThresholdClass(String),
}

/// Failures while reading the columnar table or config formats.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("line {line}, column '{column}': cannot parse '{value}' as {expected}")]
    Value {
        line: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("header is missing required column '{0}'")]
    MissingColumn(String),

    #[error("header declares unrecognized column '{0}'")]
    UnknownColumn(String),

    #[error("header declares column '{0}' twice")]
    DuplicateColumn(String),

    #[error("config: {0}")]
    Config(String),

    #[error("scene spec: {0}")]
    SceneSpec(String),
}

/// Failures specific to overlapping-tile merging.
#[derive(Debug, Error)]
pub enum MergeError {
    #[error("no tiles to merge")]
    NoTiles,

    #[error("tile '{tile}' has no probability columns for model '{model}'")]
    MissingProbabilities { tile: String, model: String },

    #[error("tile '{tile}' declares models {got:?}, expected {expected:?}")]
    ModelSetMismatch {
        tile: String,
        expected: Vec<String>,
        got: Vec<String>,
    },

    #[error("tile '{tile}' covers {got} classes in its probability columns, expected {expected}")]
    ClassCountMismatch {
        tile: String,
        expected: usize,
        got: usize,
    },
}

/// Rejections of degenerate synthetic scene specs.
#[derive(Debug, Error)]
pub enum SceneError {
    #[error("degenerate scene spec: {0}")]
    Degenerate(String),

    #[error("recipe '{name}' needs {needed} candidate points but only {available} qualify")]
    NotEnoughCandidates {
        name: String,
        needed: usize,
        available: usize,
    },
}

/// Umbrella error for library entry points that touch files.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Merge(#[from] MergeError),

    #[error(transparent)]
    Scene(#[from] SceneError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by unreadable/unwritable files rather than
    /// by the content of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
