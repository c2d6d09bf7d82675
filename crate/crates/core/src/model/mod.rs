//! The hierarchical multi-label tagger.
//!
//! Each utterance is encoded by a bidirectional LSTM into `z_i`; a
//! unidirectional dialogue-level LSTM over `z_1..z_{i-1}` gives `e_i`; the
//! agent indicator `g_i` and a window of the `K` previous turns' many-hot
//! act vectors `p_i` complete the context `C_i = e_i ⊕ g_i ⊕ p_i`. One
//! feed-forward head per act maps `z_i ⊕ C_i` to a sigmoid score, trained
//! with binary cross-entropy summed over turns and acts.
//!
//! Everything runs in `f64` with hand-written backpropagation; checkpoints
//! store `f32`.

mod checkpoint;
mod gradcheck;
mod lstm;
mod tagger;
mod vocab;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::CHECKPOINT_MAGIC;
pub use gradcheck::{gradient_check, GradCheckReport, GRADIENT_FLOOR};
pub use lstm::LstmParams;
pub use tagger::{EncodedDialogue, Params, Tagger};
pub use vocab::{load_pretrained, random_embeddings, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("act `{0}` is not in the model's label space")]
    UnknownAct(String),
    #[error("target {value} for act {act} of dialogue {dialogue} turn {turn} is not binary")]
    NonBinaryTarget {
        dialogue: String,
        turn: usize,
        act: usize,
        value: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Embeddings { path: PathBuf, line: usize, message: String },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, ModelError>;

fn d_utterance_hidden() -> usize {
    128
}
fn d_dialogue_hidden() -> usize {
    256
}
fn d_embedding_dim() -> usize {
    300
}
fn d_n_acts() -> usize {
    20
}
fn d_window() -> usize {
    4
}
fn d_true() -> bool {
    true
}
fn d_threshold() -> f64 {
    0.5
}
fn d_head_hidden() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_utterance_hidden")]
    pub utterance_hidden: usize,
    #[serde(default = "d_dialogue_hidden")]
    pub dialogue_hidden: usize,
    #[serde(default = "d_embedding_dim")]
    pub embedding_dim: usize,
    #[serde(default = "d_n_acts")]
    pub n_acts: usize,
    /// `K`, the number of previous turns in the past-act window.
    #[serde(default = "d_window")]
    pub past_act_window: usize,
    #[serde(default = "d_true")]
    pub use_past_acts: bool,
    #[serde(default = "d_true")]
    pub use_agent: bool,
    #[serde(default = "d_threshold")]
    pub decision_threshold: f64,
    /// Width of each act head's hidden layer.
    #[serde(default = "d_head_hidden")]
    pub head_hidden: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            utterance_hidden: d_utterance_hidden(),
            dialogue_hidden: d_dialogue_hidden(),
            embedding_dim: d_embedding_dim(),
            n_acts: d_n_acts(),
            past_act_window: d_window(),
            use_past_acts: true,
            use_agent: true,
            decision_threshold: d_threshold(),
            head_hidden: d_head_hidden(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("utterance_hidden", self.utterance_hidden),
            ("dialogue_hidden", self.dialogue_hidden),
            ("embedding_dim", self.embedding_dim),
            ("n_acts", self.n_acts),
            ("head_hidden", self.head_hidden),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(ModelError::InvalidConfig(format!(
                "decision_threshold {} outside (0,1)",
                self.decision_threshold
            )));
        }
        Ok(())
    }

    pub fn utterance_dim(&self) -> usize {
        2 * self.utterance_hidden
    }

    /// `|C_i|`
    pub fn context_dim(&self) -> usize {
        self.dialogue_hidden + usize::from(self.use_agent) + self.past_dim()
    }

    pub fn past_dim(&self) -> usize {
        if self.use_past_acts {
            self.past_act_window * self.n_acts
        } else {
            0
        }
    }

    /// `|z_i| + |C_i|`
    pub fn head_input_dim(&self) -> usize {
        self.utterance_dim() + self.context_dim()
    }
}

/// `C_i` split into its parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextState {
    pub e: Vec<f64>,
    pub g: f64,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub acts: BTreeSet<String>,
}

/// Source of the previous turns' act vectors in the past-act window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextFeed {
    /// Always the model's own thresholded predictions.
    Predicted,
    /// Gold acts on labeled turns, predictions elsewhere.
    #[default]
    GoldIfPresent,
}
