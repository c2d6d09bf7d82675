use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Result, TrainingError};
use crate::corpus::{Corpus, Side, Turn};
use crate::model::{ContextFeed, Tagger};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences.
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ActMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let (precision, recall, f1) = prf(tp, fp, fn_);
        ActMetrics {
            precision,
            recall,
            f1,
            support: tp + fn_,
            tp,
            fp,
            fn_,
        }
    }
}

/// Precision, recall and F1, each 0 when its denominator is 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub micro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    /// Unweighted mean of per-act F1 over acts that occur in the gold or
    /// predicted sets.
    pub macro_f1: f64,
    pub per_act: BTreeMap<String, ActMetrics>,
    pub side: Side,
    pub n_turns: usize,
}

/// Micro-averaged F1 over all (turn, act) decisions, with per-act counts.
pub fn f1_score(predictions: &[BTreeSet<String>], golds: &[BTreeSet<String>]) -> Result<MetricsReport> {
    if predictions.len() != golds.len() {
        return Err(TrainingError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let mut counts: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(golds) {
        for a in p.union(g) {
            let c = counts.entry(a.as_str()).or_default();
            match (p.contains(a), g.contains(a)) {
                (true, true) => c[0] += 1,
                (true, false) => c[1] += 1,
                _ => c[2] += 1,
            }
        }
    }
    let total = counts
        .values()
        .fold([0; 3], |acc, c| [acc[0] + c[0], acc[1] + c[1], acc[2] + c[2]]);
    let (micro_precision, micro_recall, micro_f1) = prf(total[0], total[1], total[2]);
    let per_act: BTreeMap<String, ActMetrics> = counts
        .into_iter()
        .map(|(a, c)| (a.to_string(), ActMetrics::from_counts(c[0], c[1], c[2])))
        .collect();
    let macro_f1 = if per_act.is_empty() {
        0.0
    } else {
        per_act.values().map(|m| m.f1).sum::<f64>() / per_act.len() as f64
    };
    Ok(MetricsReport {
        micro_f1,
        micro_precision,
        micro_recall,
        macro_f1,
        per_act,
        side: Side::Both,
        n_turns: golds.len(),
    })
}

/// Scores the labeled turns of `side` with the default context feed.
pub fn evaluate(tagger: &Tagger, corpus: &Corpus, side: Side) -> Result<MetricsReport> {
    evaluate_with(tagger, corpus, side, ContextFeed::default())
}

pub fn evaluate_with(tagger: &Tagger, corpus: &Corpus, side: Side, feed: ContextFeed) -> Result<MetricsReport> {
    evaluate_where(tagger, corpus, side, feed, |_| true)
}

/// Like [`evaluate_with`], restricted to turns accepted by `keep`.
pub fn evaluate_where(
    tagger: &Tagger,
    corpus: &Corpus,
    side: Side,
    feed: ContextFeed,
    keep: impl Fn(&Turn) -> bool + Sync,
) -> Result<MetricsReport> {
    score(tagger, &[corpus], side, feed, &keep)
}

/// One report over the labeled `side` turns of every corpus, with counts
/// pooled before averaging.
pub fn evaluate_pooled(tagger: &Tagger, corpora: &[&Corpus], side: Side, feed: ContextFeed) -> Result<MetricsReport> {
    score(tagger, corpora, side, feed, &|_| true)
}

fn score(
    tagger: &Tagger,
    corpora: &[&Corpus],
    side: Side,
    feed: ContextFeed,
    keep: &(dyn Fn(&Turn) -> bool + Sync),
) -> Result<MetricsReport> {
    use rayon::prelude::*;
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    for corpus in corpora {
        let per_dialogue: Vec<Vec<(BTreeSet<String>, BTreeSet<String>)>> = corpus
            .dialogues
            .par_iter()
            .map(|d| {
                let predicted = tagger.tag_dialogue(d, feed, corpus.labeled)?;
                Ok(d.turns
                    .iter()
                    .zip(predicted)
                    .filter(|(t, _)| side.includes(t.agent) && corpus.labeled.covers(t.agent) && keep(t))
                    .map(|(t, p)| (p.acts, t.act_names()))
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (p, g) in per_dialogue.into_iter().flatten() {
            preds.push(p);
            golds.push(g);
        }
    }
    if golds.is_empty() {
        return Err(TrainingError::NoTurns(side));
    }
    let mut report = f1_score(&preds, &golds)?;
    report.side = side;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(acts: &[&str]) -> BTreeSet<String> {
        acts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_computed_partial_match() {
        let r = f1_score(&[set(&["inform"])], &[set(&["inform", "request"])]).unwrap();
        assert_eq!(r.micro_precision, 1.0);
        assert_eq!(r.micro_recall, 0.5);
        assert!((r.micro_f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_act["request"].support, 1);
        assert_eq!(r.per_act["request"].f1, 0.0);
        assert_eq!(r.macro_f1, 0.5);
    }

    #[test]
    fn identity_empty_and_mismatch() {
        let g = vec![set(&["bye"]), set(&["inform", "affirm"])];
        assert_eq!(f1_score(&g, &g).unwrap().micro_f1, 1.0);
        assert_eq!(f1_score(&[set(&[]), set(&[])], &g).unwrap().micro_f1, 0.0);
        assert_eq!(f1_score(&[set(&[])], &[set(&[])]).unwrap().micro_f1, 0.0);
        assert!(matches!(f1_score(&g[..1], &g), Err(TrainingError::LengthMismatch { .. })));
    }
}
