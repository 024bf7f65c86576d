use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error. Each module has its own enum; this wraps them.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Run(#[from] RunError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("modality set is empty")]
    EmptyModalitySet,
    #[error("modality name is empty")]
    EmptyModalityName,
    #[error("duplicate modality `{0}`")]
    DuplicateModality(String),
    #[error("unknown modality `{0}`")]
    UnknownModality(String),
    #[error("duplicate comparison pair ({probe}, {gallery})")]
    DuplicatePair { probe: String, gallery: String },
    #[error("row {row}: all scores are missing")]
    AllScoresMissing { row: usize },
    #[error("row {row}: score for modality {modality} is not finite")]
    NonFiniteScore { row: usize, modality: usize },
    #[error("row {row}: expected {expected} scores, found {found}")]
    ArityMismatch { row: usize, expected: usize, found: usize },
    #[error("need at least 2 probe identities to split, found {found}")]
    TooFewIdentities { found: usize },
    #[error("split fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: u64, reason: String },
    #[error("line {line}: unknown modality `{name}`")]
    UnknownModality { line: u64, name: String },
    #[error("line {line}: duplicate cell ({probe}, {gallery}, {modality})")]
    DuplicateCell { line: u64, probe: String, gallery: String, modality: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}: field `{field}` is not a finite number")]
    NonNumericScore { line: u64, field: String },
    #[error("{file}: row {row}: expected {expected} values, found {found}")]
    ShapeMismatch { file: PathBuf, row: usize, expected: usize, found: usize },
    #[error("inventory mismatch for {what}: expected {expected}, found {found}")]
    InventoryMismatch { what: String, expected: usize, found: usize },
    #[error("table cannot be written as {format}: {reason}")]
    NotRepresentable { format: &'static str, reason: String },
    #[error("{0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("unknown modality `{0}`")]
    UnknownModality(String),
    #[error("missing level {0} is outside [0, 1]")]
    LevelOutOfRange(f64),
    #[error("missing level {level} is infeasible: {reason}")]
    InfeasibleLevel { level: f64, reason: String },
    #[error("scenario needs at least 2 modalities, table has {0}")]
    TooFewModalities(usize),
    #[error("plan shape {plan_rows}x{plan_modalities} does not match table {rows}x{modalities}")]
    ShapeMismatch { plan_rows: usize, plan_modalities: usize, rows: usize, modalities: usize },
    #[error("{0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("modality `{modality}` needs at least 2 distinct training scores")]
    DegenerateModality { modality: String },
    #[error("normalization params cover {params} modalities, table has {table}")]
    ShapeMismatch { params: usize, table: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressorError {
    #[error("need at least {required} rows, found {found}")]
    TooFewRows { required: usize, found: usize },
    #[error("feature width {found} does not match {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImputeError {
    #[error("modality `{modality}` has no present training scores")]
    EmptyColumn { modality: String },
    #[error("modality `{modality}` has {found} observed training rows, need {required}")]
    NotEnoughObservedRows { modality: String, found: usize, required: usize },
    #[error("fitting regressor for modality `{modality}`: {source}")]
    RegressorFitFailure {
        modality: String,
        #[source]
        source: RegressorError,
    },
    #[error("imputer fitted on {fitted} modalities, table has {table}")]
    ShapeMismatch { fitted: usize, table: usize },
    #[error("iterative imputation needs at least 2 modalities, table has {0}")]
    TooFewModalities(usize),
    #[error("invalid imputer spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("row {row} has missing scores and skip_missing is disabled")]
    IncompleteWithSkipDisabled { row: usize },
    #[error("row {row} has no scores")]
    RowWithNoScores { row: usize },
    #[error("ROC needs both genuine and impostor scores (genuine {genuine}, impostor {impostor})")]
    OneClassOnly { genuine: usize, impostor: usize },
    #[error("probe `{0}` has no genuine comparison")]
    ProbeWithoutMate(String),
    #[error("probe `{0}` has more than one genuine comparison")]
    ProbeWithMultipleMates(String),
    #[error("max rank must be at least 1")]
    InvalidMaxRank,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("level {level}, repetition {repetition}, method {method}: {source}")]
    Cell {
        level: f64,
        repetition: usize,
        method: String,
        #[source]
        source: Box<Error>,
    },
    #[error("repetition {repetition}: {source}")]
    Repetition {
        repetition: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}
