use serde::{Deserialize, Serialize};

use super::Result;
use crate::corpus::{split_by_hash, Corpus, DialogueAct, LabelProvenance, Labeling, Side};
use crate::model::{ContextFeed, ModelConfig, Tagger};
use crate::training::{evaluate, train, MetricsReport, TrainConfig};

fn union(a: Labeling, b: Labeling) -> Labeling {
    match (a, b) {
        (Labeling::Both, _) | (_, Labeling::Both) => Labeling::Both,
        (Labeling::System, _) | (_, Labeling::System) => Labeling::System,
        _ => Labeling::Unlabeled,
    }
}

/// Replaces the acts of every turn covered by `target` with the teacher's
/// thresholded predictions. Text, agents and turn order are untouched; the
/// result is marked as carrying estimated labels.
pub fn self_label(teacher: &Tagger, corpus: &Corpus, target: Labeling, feed: ContextFeed) -> Result<Corpus> {
    let mut out = corpus.clone();
    for d in &mut out.dialogues {
        let preds = teacher.tag_dialogue(d, feed, corpus.labeled)?;
        for (t, p) in d.turns.iter_mut().zip(preds) {
            if target.covers(t.agent) {
                t.set_acts(p.acts.into_iter().map(DialogueAct::universal).collect());
            }
        }
    }
    out.labeled = union(corpus.labeled, target);
    out.provenance = LabelProvenance::Estimated;
    Ok(out)
}

fn d_target() -> Labeling {
    Labeling::System
}
fn d_side() -> Side {
    Side::System
}
fn d_dev_fraction() -> f64 {
    0.1
}
fn d_rounds() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfTrainConfig {
    #[serde(default)]
    pub student_model: ModelConfig,
    #[serde(default)]
    pub student_train: TrainConfig,
    /// Context feed used while the teacher labels the unlabeled corpus.
    #[serde(default = "d_feed")]
    pub context_feed: ContextFeed,
    /// Sides that receive estimated labels.
    #[serde(default = "d_target")]
    pub target: Labeling,
    #[serde(default = "d_side")]
    pub eval_side: Side,
    /// Share of the self-labeled corpus held out for early stopping.
    #[serde(default = "d_dev_fraction")]
    pub dev_fraction: f64,
    /// Teacher → student rounds; each student teaches the next round.
    #[serde(default = "d_rounds")]
    pub rounds: usize,
    /// The student drops the past-act encoder unless this is set.
    #[serde(default)]
    pub student_past_acts: bool,
}

fn d_feed() -> ContextFeed {
    ContextFeed::Predicted
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            student_model: ModelConfig::default(),
            student_train: TrainConfig::default(),
            context_feed: d_feed(),
            target: d_target(),
            eval_side: d_side(),
            dev_fraction: d_dev_fraction(),
            rounds: d_rounds(),
            student_past_acts: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SemiSupervisedOutcome {
    pub student: Tagger,
    pub student_report: MetricsReport,
    pub teacher_report: MetricsReport,
    pub self_labeled: Corpus,
}

/// Labels `unlabeled` with the teacher, trains a student on those labels
/// only (no manual labels anywhere, early stopping included) and scores
/// both models on the gold `test` corpus.
pub fn semi_supervised_run(
    cfg: &SelfTrainConfig,
    teacher: &Tagger,
    unlabeled: &Corpus,
    test: &Corpus,
) -> Result<SemiSupervisedOutcome> {
    if cfg.rounds == 0 || !(0.0..1.0).contains(&cfg.dev_fraction) || !cfg.target.is_labeled() {
        return Err(super::ExperimentError::InvalidConfig(
            "rounds ≥ 1, dev_fraction in [0,1) and a labeled target side are required".into(),
        ));
    }
    let teacher_report = evaluate(teacher, test, cfg.eval_side)?;
    let model = ModelConfig {
        use_past_acts: cfg.student_past_acts,
        ..cfg.student_model.clone()
    };
    let stripped = unlabeled.strip_labels();
    let mut current = teacher.clone();
    let mut self_labeled = stripped.clone();
    for _ in 0..cfg.rounds {
        self_labeled = self_label(&current, &stripped, cfg.target, cfg.context_feed)?;
        let (train_part, dev_part, _) = split_by_hash(&self_labeled, cfg.student_train.seed, cfg.dev_fraction, 0.0);
        let (train_part, dev_part) = if train_part.is_empty() || dev_part.is_empty() {
            (self_labeled.clone(), self_labeled.clone())
        } else {
            (train_part, dev_part)
        };
        current = train(&model, &cfg.student_train, &train_part, &dev_part)?.tagger;
    }
    let student_report = evaluate(&current, test, cfg.eval_side)?;
    Ok(SemiSupervisedOutcome {
        student: current,
        student_report,
        teacher_report,
        self_labeled,
    })
}
