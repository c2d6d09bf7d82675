//! Optimization loop, multi-label F1 evaluation and the transfer-matrix and
//! learning-curve experiment grids.

mod grids;
mod metrics;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Dialogue, Namespace, Side};
use crate::model::{load_pretrained, ContextFeed, EncodedDialogue, ModelConfig, ModelError, Params, Tagger, Vocabulary};
use crate::schema::LabelSpace;

pub use grids::{learning_curve, transfer_matrix, CurvePoint, DatasetSplits, LearningCurve, TransferMatrix, ALL_DATASET};
pub use metrics::{evaluate, evaluate_pooled, evaluate_where, evaluate_with, f1_score, prf, ActMetrics, MetricsReport};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("{0}")]
    EmptyCorpus(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
    #[error("{predictions} predictions for {golds} gold turns")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no labeled {0} turns to score")]
    NoTurns(Side),
    #[error("cell train={train}{}: {source}", test.as_ref().map(|t| format!(" test={t}")).unwrap_or_default())]
    Cell {
        train: String,
        test: Option<String>,
        #[source]
        source: Box<TrainingError>,
    },
    #[error("requested {requested} turns but the pool has only {available}")]
    Budget { requested: usize, available: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, TrainingError>;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

fn d_lr() -> f64 {
    0.001
}
fn d_batch() -> usize {
    100
}
fn d_epochs() -> usize {
    100
}
fn d_patience() -> usize {
    10
}
fn d_side() -> Side {
    Side::Both
}
fn d_min_count() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    /// Dialogues per batch.
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_epochs")]
    pub max_epochs: usize,
    /// Epochs without a dev micro-F1 gain before stopping.
    #[serde(default = "d_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    /// Turns scored on the dev set (only labeled turns count).
    #[serde(default = "d_side")]
    pub eval_side: Side,
    /// Minimum training-corpus frequency for a token to enter the vocabulary.
    #[serde(default = "d_min_count")]
    pub min_count: usize,
    #[serde(default)]
    pub pretrained_embeddings: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: d_lr(),
            batch_size: d_batch(),
            max_epochs: d_epochs(),
            patience: d_patience(),
            seed: 0,
            eval_side: d_side(),
            min_count: d_min_count(),
            pretrained_embeddings: None,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted so that a run can be checked to
    /// leave parameters untouched.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainingError::InvalidConfig(format!(
                "learning_rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(TrainingError::InvalidConfig(
                "batch_size, patience and max_epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    t: i32,
    m: Params,
    v: Params,
}

impl Adam {
    pub fn new(params: &Params, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut Params, grad: &Params) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let lr = self.learning_rate;
        let grads = grad.tensors();
        for (((p, m), v), (_, _, g)) in params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(grads)
        {
            for k in 0..p.len() {
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPSILON);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sum of the batch losses seen during the epoch.
    pub train_loss: f64,
    pub dev_micro_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev micro-F1.
    pub tagger: Tagger,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    /// Training-set loss before the first update.
    pub initial_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// The universal inventory for universal corpora, otherwise the sorted act
/// names found in the given corpora.
pub fn label_space_for(corpora: &[&Corpus]) -> LabelSpace {
    if corpora.iter().all(|c| c.source == Namespace::Universal) {
        return LabelSpace::universal();
    }
    let names: BTreeSet<String> = corpora
        .iter()
        .flat_map(|c| c.dialogues.iter().flat_map(|d| d.turns.iter().flat_map(|t| t.act_names())))
        .collect();
    LabelSpace::new(names)
}

/// Trains with the label space of [`label_space_for`] on `train` and `dev`.
/// `model_config.n_acts` is replaced by the size of that space.
pub fn train(model_config: &ModelConfig, train_config: &TrainConfig, train: &Corpus, dev: &Corpus) -> Result<TrainOutcome> {
    train_pooled(model_config, train_config, &[train], &[dev])
}

/// Trains on several corpora at once, each encoded with its own labeling;
/// dev micro-F1 is pooled over `devs`.
pub fn train_pooled(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    trains: &[&Corpus],
    devs: &[&Corpus],
) -> Result<TrainOutcome> {
    let all: Vec<&Corpus> = trains.iter().chain(devs).copied().collect();
    train_with_labels(label_space_for(&all), model_config, train_config, trains, devs)
}

pub fn train_with_labels(
    labels: LabelSpace,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    trains: &[&Corpus],
    devs: &[&Corpus],
) -> Result<TrainOutcome> {
    train_config.validate()?;
    if trains.iter().map(|c| c.labeled_turns(Side::Both)).sum::<usize>() == 0 {
        return Err(TrainingError::EmptyCorpus("training corpus has no labeled turns".into()));
    }
    if devs.iter().all(|c| c.is_empty()) {
        return Err(TrainingError::EmptyCorpus("dev corpus is empty".into()));
    }
    let config = ModelConfig {
        n_acts: labels.len(),
        ..model_config.clone()
    };
    let vocab = Vocabulary::from_corpora(trains, train_config.min_count);
    let mut tagger = Tagger::new(config, labels, vocab)?;
    if let Some(path) = &train_config.pretrained_embeddings {
        load_pretrained(path, &tagger.vocab, &mut tagger.params.embedding)?;
    }
    let mut encoded = Vec::new();
    for c in trains {
        for d in &c.dialogues {
            encoded.push(tagger.encode_dialogue(d, c.labeled)?);
        }
    }
    fit(tagger, &encoded, train_config, devs)
}

/// Runs the optimization loop on pre-encoded dialogues, starting from `tagger`.
pub fn fit(mut tagger: Tagger, encoded: &[EncodedDialogue], cfg: &TrainConfig, devs: &[&Corpus]) -> Result<TrainOutcome> {
    cfg.validate()?;
    if encoded.is_empty() {
        return Err(TrainingError::EmptyCorpus("training corpus is empty".into()));
    }
    let initial_loss = tagger.batch_loss(encoded)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&tagger.params, cfg.learning_rate);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, Tagger)> = None;
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let dialogues: Vec<EncodedDialogue> = idx.iter().map(|&i| encoded[i].clone()).collect();
            let (loss, grad) = tagger.batch_loss_and_grad(&dialogues)?;
            if !loss.is_finite() {
                return Err(TrainingError::Divergence { epoch, batch, loss });
            }
            adam.step(&mut tagger.params, &grad);
            epoch_loss += loss;
        }
        let dev_f1 = evaluate_pooled(&tagger, devs, cfg.eval_side, ContextFeed::default())?.micro_f1;
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss,
            dev_micro_f1: dev_f1,
        });
        match &best {
            Some((_, f, _)) if dev_f1 <= *f => {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
            _ => {
                best = Some((epoch, dev_f1, tagger.clone()));
                stale = 0;
            }
        }
    }
    let (best_epoch, best_dev_f1, tagger) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        tagger,
        best_epoch,
        best_dev_f1,
        initial_loss,
        history,
    })
}

/// Independent seed for item `index` of a grid run from `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Leading dialogues of `dialogues` until at least `budget` turns of `side`
/// are covered, or `None` if the pool is too small.
pub fn take_until(dialogues: &[Dialogue], budget: usize, side: Side) -> Option<Vec<Dialogue>> {
    let mut taken = Vec::new();
    let mut count = 0;
    for d in dialogues {
        if count >= budget {
            break;
        }
        count += d.count_side(side);
        taken.push(d.clone());
    }
    (count >= budget).then_some(taken)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticSpec};

    fn tiny() -> ModelConfig {
        ModelConfig {
            utterance_hidden: 4,
            dialogue_hidden: 4,
            embedding_dim: 4,
            head_hidden: 4,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let c = generate_synthetic(&SyntheticSpec::new(6, 1)).unwrap().corpus;
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let out = train(&tiny(), &cfg, &c, &c).unwrap();
        let fresh = Tagger::new(out.tagger.config.clone(), LabelSpace::universal(), out.tagger.vocab.clone()).unwrap();
        assert_eq!(out.tagger.params, fresh.params);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let c = generate_synthetic(&SyntheticSpec::new(8, 2)).unwrap().corpus;
        let cfg = TrainConfig {
            learning_rate: 0.01,
            max_epochs: 3,
            batch_size: 3,
            ..TrainConfig::default()
        };
        let a = train(&tiny(), &cfg, &c, &c).unwrap();
        let b = train(&tiny(), &cfg, &c, &c).unwrap();
        assert_eq!(a.history, b.history);
        assert!(a.history.iter().all(|r| r.train_loss.is_finite()));
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let c = generate_synthetic(&SyntheticSpec::new(2, 2)).unwrap().corpus;
        let empty = c.strip_labels();
        assert!(matches!(
            train(&tiny(), &TrainConfig::default(), &empty, &c),
            Err(TrainingError::EmptyCorpus(_))
        ));
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&tiny(), &bad, &c, &c), Err(TrainingError::InvalidConfig(_))));
    }

    #[test]
    fn budget_prefix() {
        let c = generate_synthetic(&SyntheticSpec::new(10, 3)).unwrap().corpus;
        let total = c.count_side(Side::System);
        let got = take_until(&c.dialogues, 5, Side::System).unwrap();
        let n: usize = got.iter().map(|d| d.count_side(Side::System)).sum();
        assert!(n >= 5);
        assert!(n - got.last().unwrap().count_side(Side::System) < 5);
        assert!(take_until(&c.dialogues, total + 1, Side::System).is_none());
        assert_eq!(take_until(&c.dialogues, 0, Side::System).unwrap().len(), 0);
    }
}
