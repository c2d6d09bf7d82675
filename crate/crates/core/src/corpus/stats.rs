use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{delexicalize, Agent, Corpus, CorpusError, Namespace, Result, Side};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_dialogues: usize,
    pub avg_turns_per_dialogue: f64,
    /// Absent when the system side carries no labels.
    pub n_system_acts: Option<usize>,
    pub system_vocab_size: usize,
    pub n_system_turns: usize,
    pub n_unique_system_turns: usize,
    /// Zero when the corpus has no system turns.
    pub pct_unique_system_turns: f64,
}

/// `Restaurant-Inform` → `Inform`; names without a domain prefix pass through.
pub fn strip_domain_prefix(name: &str) -> &str {
    name.split_once('-').map_or(name, |(_, rest)| rest)
}

fn display_name(source: Namespace, name: &str) -> String {
    if source == Namespace::Multiwoz {
        strip_domain_prefix(name).to_string()
    } else {
        name.to_string()
    }
}

pub fn compute_stats(corpus: &Corpus) -> Result<CorpusStats> {
    if corpus.dialogues.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut acts = BTreeSet::new();
    let mut vocab = BTreeSet::new();
    let mut unique = BTreeSet::new();
    let mut n_system_turns = 0usize;
    for d in &corpus.dialogues {
        for t in d.turns.iter().filter(|t| t.agent == Agent::System) {
            n_system_turns += 1;
            for a in &t.acts {
                acts.insert(display_name(corpus.source, &a.name));
            }
            for w in t.utterance.to_lowercase().split_whitespace() {
                vocab.insert(w.to_string());
            }
            unique.insert(delexicalize(t));
        }
    }
    let n_turns = corpus.n_turns();
    let pct = if n_system_turns == 0 {
        0.0
    } else {
        100.0 * unique.len() as f64 / n_system_turns as f64
    };
    Ok(CorpusStats {
        n_dialogues: corpus.dialogues.len(),
        avg_turns_per_dialogue: n_turns as f64 / corpus.dialogues.len() as f64,
        n_system_acts: corpus.labeled.covers(Agent::System).then_some(acts.len()),
        system_vocab_size: vocab.len(),
        n_system_turns,
        n_unique_system_turns: unique.len(),
        pct_unique_system_turns: pct,
    })
}

/// Fraction of `side` turns that contain each act at least once.
pub fn act_distribution(corpus: &Corpus, side: Agent) -> Result<BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for t in corpus
        .dialogues
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| t.agent == side)
    {
        total += 1;
        let names: BTreeSet<String> = t.acts.iter().map(|a| display_name(corpus.source, &a.name)).collect();
        for n in names {
            *counts.entry(n).or_default() += 1;
        }
    }
    if total == 0 {
        return Err(CorpusError::NoTurnsOnSide(side));
    }
    Ok(counts
        .into_iter()
        .map(|(k, v)| (k, v as f64 / total as f64))
        .collect())
}

impl Corpus {
    pub fn stats(&self) -> Result<CorpusStats> {
        compute_stats(self)
    }

    /// Number of `side` turns whose side is labeled.
    pub fn labeled_turns(&self, side: Side) -> usize {
        self.dialogues
            .iter()
            .flat_map(|d| &d.turns)
            .filter(|t| side.includes(t.agent) && self.labeled.covers(t.agent))
            .count()
    }
}
