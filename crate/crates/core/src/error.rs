use std::path::PathBuf;

use thiserror::Error;

use crate::substructure::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("need {needed} OOD graphs but only {available} are available")]
    InsufficientOod { needed: usize, available: usize },

    #[error("node degree {degree} exceeds max_degree {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("cannot batch an empty list of graphs")]
    EmptyBatch,

    #[error("feature width mismatch: expected {expected}, found {found}")]
    FeatureWidth { expected: usize, found: usize },

    #[error("modularity is undefined on a graph without edges")]
    EdgelessGraph,

    #[error("partition violates substructure properties: {0:?}")]
    InvalidPartition(Vec<Violation>),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("zero-norm vector cannot be normalized")]
    ZeroNorm,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("covariance matrix is singular even after ridge regularization")]
    Singular,

    #[error("metric requires both ID and OOD samples")]
    SingleClass,

    #[error("contrastive loss needs at least 2 graphs per batch, got {0}")]
    BatchTooSmall(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
