//! Self-training on unlabeled dialogues and leave-one-domain-out adaptation.

pub mod data;
pub mod fixtures;
mod loo;
mod manifest;
mod selftrain;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::model::ModelError;
use crate::schema::SchemaError;
use crate::training::TrainingError;

pub use loo::{domain_ablation, leave_one_domain_out, DomainRow, DomainTable, LabelSource, LooAudit, LooConfig, LooOutcome};
pub use manifest::{sha256_file, RunManifest};
pub use selftrain::{self_label, semi_supervised_run, SelfTrainConfig, SemiSupervisedOutcome};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("domain `{domain}`: {what} budget of {budget} system turns exceeds the {available} available (short by {})", budget - available)]
    InsufficientTurns {
        domain: String,
        what: &'static str,
        budget: usize,
        available: usize,
    },
    #[error("domain `{0}` has no test turns")]
    NoTestTurns(String),
    #[error("label source `teacher` needs a teacher model")]
    MissingTeacher,
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
