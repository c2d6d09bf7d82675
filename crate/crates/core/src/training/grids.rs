use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, evaluate_pooled, take_until, train_pooled, Result, TrainConfig, TrainingError};
use crate::corpus::{Corpus, Side};
use crate::model::{ContextFeed, ModelConfig};

/// Name of the pseudo-dataset combining the partitions of all others.
pub const ALL_DATASET: &str = "All";

#[derive(Clone, Debug)]
pub struct DatasetSplits {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    /// Row and column order; single datasets first, then [`ALL_DATASET`]
    /// when there are at least two.
    pub datasets: Vec<String>,
    /// `cells[train][test]` micro-F1.
    pub cells: Vec<Vec<f64>>,
    /// Number of leading single datasets the marginals average over.
    pub n_single: usize,
    /// Mean of off-diagonal cells among single datasets.
    pub inter_average: Option<f64>,
    /// Mean of diagonal cells among single datasets.
    pub intra_average: Option<f64>,
    pub side: Side,
}

impl TransferMatrix {
    pub fn from_cells(datasets: Vec<String>, cells: Vec<Vec<f64>>, n_single: usize, side: Side) -> Self {
        let mut m = TransferMatrix {
            datasets,
            cells,
            n_single,
            inter_average: None,
            intra_average: None,
            side,
        };
        (m.inter_average, m.intra_average) = m.marginals();
        m
    }

    /// `(inter, intra)` recomputed from the cells.
    pub fn marginals(&self) -> (Option<f64>, Option<f64>) {
        let n = self.n_single;
        let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let diag = (0..n).map(|i| self.cells[i][i]).collect();
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.cells[i][j])
            .collect();
        (mean(off), mean(diag))
    }

    pub fn cell(&self, train: &str, test: &str) -> Option<f64> {
        let i = self.datasets.iter().position(|d| d == train)?;
        let j = self.datasets.iter().position(|d| d == test)?;
        Some(self.cells[i][j])
    }
}

/// Trains one model per dataset (plus the combined set) and scores it on
/// every test set. Row `r` uses seeds derived from the configured ones by `r`.
pub fn transfer_matrix(
    datasets: &[(String, DatasetSplits)],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    side: Side,
) -> Result<TransferMatrix> {
    if datasets.is_empty() {
        return Err(TrainingError::InvalidConfig("transfer matrix needs at least one dataset".into()));
    }
    let n_single = datasets.len();
    type Parts<'a> = (Vec<&'a Corpus>, Vec<&'a Corpus>, Vec<&'a Corpus>);
    let mut groups: Vec<(String, Parts)> = datasets
        .iter()
        .map(|(name, s)| (name.clone(), (vec![&s.train], vec![&s.dev], vec![&s.test])))
        .collect();
    if n_single >= 2 {
        groups.push((
            ALL_DATASET.to_string(),
            (
                datasets.iter().map(|(_, s)| &s.train).collect(),
                datasets.iter().map(|(_, s)| &s.dev).collect(),
                datasets.iter().map(|(_, s)| &s.test).collect(),
            ),
        ));
    }
    let rows: Vec<Vec<f64>> = groups
        .par_iter()
        .enumerate()
        .map(|(r, (name, (train, dev, _)))| {
            let cell_err = |test: Option<String>| {
                let name = name.clone();
                move |e: TrainingError| TrainingError::Cell {
                    train: name,
                    test,
                    source: Box::new(e),
                }
            };
            let mc = ModelConfig {
                seed: derive_seed(model_config.seed, r as u64),
                ..model_config.clone()
            };
            let tc = TrainConfig {
                seed: derive_seed(train_config.seed, r as u64),
                ..train_config.clone()
            };
            let model = train_pooled(&mc, &tc, train, dev).map_err(cell_err(None))?.tagger;
            groups
                .iter()
                .map(|(test_name, (_, _, test))| {
                    evaluate_pooled(&model, test, side, ContextFeed::default())
                        .map(|r| r.micro_f1)
                        .map_err(cell_err(Some(test_name.clone())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(TransferMatrix::from_cells(
        groups.into_iter().map(|(n, _)| n).collect(),
        rows,
        n_single,
        side,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Requested number of system turns.
    pub n_turns: usize,
    /// System turns actually covered by the whole dialogues used.
    pub actual_turns: usize,
    pub n_dialogues: usize,
    pub micro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub side: Side,
    pub points: Vec<CurvePoint>,
    /// Horizontal reference lines, e.g. scores of other models.
    pub references: BTreeMap<String, f64>,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_turns,f1\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.n_turns, p.micro_f1));
        }
        out
    }
}

/// Trains on nested, seeded random prefixes of `pool` (whole dialogues)
/// reaching each requested number of system turns and scores each model
/// on `test`.
#[allow(clippy::too_many_arguments)]
pub fn learning_curve(
    pool: &Corpus,
    sizes: &[usize],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    dev: &Corpus,
    test: &Corpus,
    side: Side,
    references: BTreeMap<String, f64>,
) -> Result<LearningCurve> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TrainingError::InvalidConfig("learning-curve sizes must be strictly ascending".into()));
    }
    let available = pool.count_side(Side::System);
    if let Some(&too_big) = sizes.iter().find(|&&s| s > available) {
        return Err(TrainingError::Budget {
            requested: too_big,
            available,
        });
    }
    let mut shuffled = pool.dialogues.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(train_config.seed));
    let points = sizes
        .par_iter()
        .enumerate()
        .map(|(k, &n)| {
            let dialogues = take_until(&shuffled, n, Side::System).expect("checked against pool size");
            let subset = Corpus {
                dialogues,
                ..pool.clone()
            };
            let mc = ModelConfig {
                seed: derive_seed(model_config.seed, k as u64),
                ..model_config.clone()
            };
            let tc = TrainConfig {
                seed: derive_seed(train_config.seed, k as u64),
                ..train_config.clone()
            };
            let model = train_pooled(&mc, &tc, &[&subset], &[dev])?.tagger;
            let f1 = evaluate_pooled(&model, &[test], side, ContextFeed::default())?.micro_f1;
            Ok(CurvePoint {
                n_turns: n,
                actual_turns: subset.count_side(Side::System),
                n_dialogues: subset.dialogues.len(),
                micro_f1: f1,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LearningCurve {
        side,
        points,
        references,
    })
}
