use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{self_label, ExperimentError, Result};
use crate::corpus::{Corpus, Dialogue, Side};
use crate::model::{ContextFeed, ModelConfig, Tagger};
use crate::training::{derive_seed, evaluate_where, take_until, train_pooled, DatasetSplits, MetricsReport, TrainConfig};

/// Where the in-domain turns' labels come from: the three supervision
/// settings of the domain ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    None,
    Teacher,
    Gold,
}

fn d_ood() -> usize {
    3000
}
fn d_in_domain() -> usize {
    300
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LooConfig {
    pub held_out_domain: String,
    /// System turns of out-of-domain gold data.
    #[serde(default = "d_ood")]
    pub ood_turn_budget: usize,
    /// System turns of held-out-domain data added unless the source is `none`.
    #[serde(default = "d_in_domain")]
    pub in_domain_turn_budget: usize,
    pub in_domain_label_source: LabelSource,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Seeds the dialogue sampling; the in-domain sample depends only on it,
    /// so all label sources see the same turns.
    #[serde(default)]
    pub seed: u64,
    /// Off by default: these students drop the past-act encoder.
    #[serde(default)]
    pub use_past_acts: bool,
}

/// What went into a run, for the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooAudit {
    pub ood_dialogues: Vec<String>,
    pub in_domain_dialogues: Vec<String>,
    pub ood_system_turns: usize,
    pub in_domain_system_turns: usize,
    /// Training turns tagged with the held-out domain.
    pub held_out_turns_in_train: usize,
    pub test_turns: usize,
}

#[derive(Clone, Debug)]
pub struct LooOutcome {
    pub domain: String,
    pub label_source: LabelSource,
    pub report: MetricsReport,
    pub audit: LooAudit,
    pub student: Tagger,
}

fn sample(pool: Vec<Dialogue>, seed: u64, budget: usize, domain: &str, what: &'static str) -> Result<Vec<Dialogue>> {
    let available = pool.iter().map(|d| d.count_side(Side::System)).sum();
    let mut pool = pool;
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    take_until(&pool, budget, Side::System).ok_or_else(|| ExperimentError::InsufficientTurns {
        domain: domain.to_string(),
        what,
        budget,
        available,
    })
}

fn touches(d: &Dialogue, domain: &str) -> bool {
    d.domains.contains(domain)
}

/// Trains a student on out-of-domain gold data (dialogues touching the
/// held-out domain are excluded entirely) plus, depending on the label
/// source, held-out-domain dialogues labeled by the teacher or by hand, and
/// scores it on the held-out domain's system turns of `data.test`.
pub fn leave_one_domain_out(data: &DatasetSplits, teacher: Option<&Tagger>, cfg: &LooConfig) -> Result<LooOutcome> {
    let x = cfg.held_out_domain.as_str();
    if cfg.ood_turn_budget == 0 || cfg.in_domain_turn_budget == 0 {
        return Err(ExperimentError::InvalidConfig("turn budgets must be positive".into()));
    }
    let test_turns = data
        .test
        .dialogues
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| t.agent == crate::corpus::Agent::System && t.domain.as_deref() == Some(x))
        .count();
    if test_turns == 0 {
        return Err(ExperimentError::NoTestTurns(x.to_string()));
    }

    let (in_pool, ood_pool): (Vec<Dialogue>, Vec<Dialogue>) =
        data.train.dialogues.iter().cloned().partition(|d| touches(d, x));
    let ood = sample(ood_pool, cfg.seed, cfg.ood_turn_budget, x, "out-of-domain")?;
    let ood = Corpus {
        dialogues: ood,
        ..data.train.clone()
    };

    let in_domain = match cfg.in_domain_label_source {
        LabelSource::None => None,
        source => {
            let chosen = sample(in_pool, derive_seed(cfg.seed, 1), cfg.in_domain_turn_budget, x, "in-domain")?;
            let gold = Corpus {
                dialogues: chosen,
                ..data.train.clone()
            };
            Some(match source {
                LabelSource::Gold => gold,
                _ => {
                    let teacher = teacher.ok_or(ExperimentError::MissingTeacher)?;
                    self_label(teacher, &gold.strip_labels(), data.train.labeled, ContextFeed::Predicted)?
                }
            })
        }
    };

    let dev = Corpus {
        dialogues: data.dev.dialogues.iter().filter(|d| !touches(d, x)).cloned().collect(),
        ..data.dev.clone()
    };
    let mut trains = vec![&ood];
    trains.extend(in_domain.as_ref());
    let model = ModelConfig {
        use_past_acts: cfg.use_past_acts,
        ..cfg.model.clone()
    };
    let student = train_pooled(&model, &cfg.train, &trains, &[&dev])?.tagger;
    let report = evaluate_where(&student, &data.test, Side::System, ContextFeed::default(), |t| {
        t.domain.as_deref() == Some(x)
    })?;

    let ids = |c: Option<&Corpus>| c.map(|c| c.dialogues.iter().map(|d| d.id.clone()).collect()).unwrap_or_default();
    let audit = LooAudit {
        ood_dialogues: ids(Some(&ood)),
        in_domain_dialogues: ids(in_domain.as_ref()),
        ood_system_turns: ood.count_side(Side::System),
        in_domain_system_turns: in_domain.as_ref().map_or(0, |c| c.count_side(Side::System)),
        held_out_turns_in_train: trains
            .iter()
            .flat_map(|c| c.dialogues.iter().flat_map(|d| &d.turns))
            .filter(|t| t.domain.as_deref() == Some(x))
            .count(),
        test_turns,
    };
    Ok(LooOutcome {
        domain: x.to_string(),
        label_source: cfg.in_domain_label_source,
        report,
        audit,
        student,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: String,
    /// The teacher itself on the held-out domain.
    pub teacher: Option<f64>,
    pub none: f64,
    pub semi: Option<f64>,
    pub gold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainTable {
    pub rows: Vec<DomainRow>,
    pub average: DomainRow,
}

/// One row per domain with the micro-F1 of each supervision setting; the
/// teacher columns are filled only when a teacher is given.
pub fn domain_ablation(data: &DatasetSplits, teacher: Option<&Tagger>, domains: &[String], base: &LooConfig) -> Result<DomainTable> {
    let rows: Vec<DomainRow> = domains
        .par_iter()
        .map(|domain| {
            let run = |source| {
                let cfg = LooConfig {
                    held_out_domain: domain.clone(),
                    in_domain_label_source: source,
                    ..base.clone()
                };
                leave_one_domain_out(data, teacher, &cfg).map(|o| o.report.micro_f1)
            };
            let teacher_f1 = teacher
                .map(|t| {
                    evaluate_where(t, &data.test, Side::System, ContextFeed::default(), |turn| {
                        turn.domain.as_deref() == Some(domain.as_str())
                    })
                    .map(|r| r.micro_f1)
                })
                .transpose()?;
            Ok(DomainRow {
                domain: domain.clone(),
                teacher: teacher_f1,
                none: run(LabelSource::None)?,
                semi: teacher.map(|_| run(LabelSource::Teacher)).transpose()?,
                gold: run(LabelSource::Gold)?,
            })
        })
        .collect::<Result<_>>()?;
    let n = rows.len().max(1) as f64;
    let mean = |f: &dyn Fn(&DomainRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let average = DomainRow {
        domain: "average".into(),
        teacher: teacher.map(|_| mean(&|r| r.teacher.unwrap_or(0.0))),
        none: mean(&|r| r.none),
        semi: teacher.map(|_| mean(&|r| r.semi.unwrap_or(0.0))),
        gold: mean(&|r| r.gold),
    };
    Ok(DomainTable { rows, average })
}
