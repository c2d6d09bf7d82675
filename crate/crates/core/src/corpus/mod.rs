//! Canonical dialogue data model.
//!
//! Every dataset adapter produces a [`Corpus`] of [`Dialogue`]s whose turns
//! carry acts in the dataset's own namespace. Alignment (see
//! [`crate::schema`]) rewrites those acts into the universal namespace, but
//! never touches text, agents or turn order.

mod canonical;
mod delex;
pub mod native;
mod stats;
pub mod synthetic;
mod tokenize;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::{load_canonical, read_canonical, save_canonical, write_canonical, SCHEMA_VERSION};
pub use delex::{delexicalize, delexicalize_tokens};
pub use native::{load_native, load_native_split};
pub use stats::{act_distribution, compute_stats, strip_domain_prefix, CorpusStats};
pub use synthetic::{generate_synthetic, split_by_hash, ActGrammar, ActProduction, DomainLexicon, SyntheticCorpus, SyntheticSpec};
pub use tokenize::{tokenize, TOKENIZER_ID};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: I/O error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}:{column}: {message}")]
    Syntax {
        file: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{file}: {json_path}{}: {message}", dialogue.as_ref().map(|d| format!(" (dialogue {d})")).unwrap_or_default())]
    Format {
        file: PathBuf,
        json_path: String,
        dialogue: Option<String>,
        message: String,
    },
    #[error("unknown dataset id `{0}`")]
    UnknownDataset(String),
    #[error("schema version mismatch: file has {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid corpus: {0}")]
    Invalid(String),
    #[error("corpus is empty")]
    Empty,
    #[error("corpus has no {0} turns")]
    NoTurnsOnSide(Agent),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    User,
    System,
}

impl Agent {
    pub fn as_str(self) -> &'static str {
        match self {
            Agent::User => "user",
            Agent::System => "system",
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Annotation namespace an act name belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Namespace {
    GsimR,
    GsimM,
    Dstc2,
    Multiwoz,
    Universal,
}

impl Namespace {
    pub const NATIVE: [Namespace; 4] = [
        Namespace::GsimR,
        Namespace::GsimM,
        Namespace::Dstc2,
        Namespace::Multiwoz,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Namespace::GsimR => "gsim_r",
            Namespace::GsimM => "gsim_m",
            Namespace::Dstc2 => "dstc2",
            Namespace::Multiwoz => "multiwoz",
            Namespace::Universal => "universal",
        }
    }
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Namespace {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gsim_r" | "sim_r" => Ok(Namespace::GsimR),
            "gsim_m" | "sim_m" => Ok(Namespace::GsimM),
            "dstc2" => Ok(Namespace::Dstc2),
            "multiwoz" => Ok(Namespace::Multiwoz),
            "universal" => Ok(Namespace::Universal),
            _ => Err(CorpusError::UnknownDataset(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "val" | "valid" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(CorpusError::Invalid(format!("unknown split `{s}`"))),
        }
    }
}

/// Which agent sides of a corpus carry act annotations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeling {
    Unlabeled,
    System,
    Both,
}

impl Labeling {
    pub fn is_labeled(self) -> bool {
        self != Labeling::Unlabeled
    }

    pub fn covers(self, agent: Agent) -> bool {
        match self {
            Labeling::Unlabeled => false,
            Labeling::System => agent == Agent::System,
            Labeling::Both => true,
        }
    }
}

/// Where the act labels came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelProvenance {
    #[default]
    Gold,
    Estimated,
}

/// Which turns an evaluation or budget selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    System,
    User,
    Both,
}

impl Side {
    pub fn includes(self, agent: Agent) -> bool {
        match self {
            Side::System => agent == Agent::System,
            Side::User => agent == Agent::User,
            Side::Both => true,
        }
    }
}

impl FromStr for Side {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "system" => Ok(Side::System),
            "user" => Ok(Side::User),
            "both" => Ok(Side::Both),
            _ => Err(CorpusError::Invalid(format!("unknown side `{s}`"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::System => "system",
            Side::User => "user",
            Side::Both => "both",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotValue {
    pub slot: String,
    pub value: String,
}

impl SlotValue {
    /// Lowercases the slot and replaces inner whitespace with `_`.
    pub fn new(slot: &str, value: impl Into<String>) -> Self {
        let slot = slot
            .trim()
            .to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join("_");
        SlotValue {
            slot,
            value: value.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogueAct {
    pub name: String,
    pub namespace: Namespace,
    #[serde(default)]
    pub args: Vec<SlotValue>,
}

impl DialogueAct {
    pub fn new(namespace: Namespace, name: impl Into<String>) -> Self {
        DialogueAct {
            name: name.into(),
            namespace,
            args: Vec::new(),
        }
    }

    pub fn universal(name: impl Into<String>) -> Self {
        Self::new(Namespace::Universal, name)
    }

    pub fn with_arg(mut self, slot: &str, value: impl Into<String>) -> Self {
        let sv = SlotValue::new(slot, value);
        if !self.args.contains(&sv) {
            self.args.push(sv);
        }
        self
    }

    pub fn with_args(mut self, args: impl IntoIterator<Item = SlotValue>) -> Self {
        for sv in args {
            if !self.args.contains(&sv) {
                self.args.push(sv);
            }
        }
        self
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if a.value.is_empty() {
                write!(f, "{}", a.slot)?;
            } else {
                write!(f, "{}={}", a.slot, a.value)?;
            }
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub agent: Agent,
    pub utterance: String,
    pub tokens: Vec<String>,
    pub acts: Vec<DialogueAct>,
    #[serde(default)]
    pub domain: Option<String>,
}

impl Turn {
    /// Builds a turn, deriving tokens from the utterance and dropping duplicate acts.
    pub fn new(agent: Agent, utterance: impl Into<String>, acts: Vec<DialogueAct>) -> Self {
        let utterance = utterance.into();
        let tokens = tokenize(&utterance);
        let mut turn = Turn {
            agent,
            utterance,
            tokens,
            acts: Vec::new(),
            domain: None,
        };
        turn.set_acts(acts);
        turn
    }

    pub fn with_domain(mut self, domain: Option<String>) -> Self {
        self.domain = domain;
        self
    }

    /// Replaces the act list, keeping first occurrences of duplicates.
    pub fn set_acts(&mut self, acts: Vec<DialogueAct>) {
        self.acts.clear();
        for act in acts {
            if !self.acts.contains(&act) {
                self.acts.push(act);
            }
        }
    }

    /// Distinct act names.
    pub fn act_names(&self) -> BTreeSet<String> {
        self.acts.iter().map(|a| a.name.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
    pub domains: BTreeSet<String>,
}

impl Dialogue {
    /// Builds a dialogue whose domain set is the union of its turn domains.
    pub fn new(id: impl Into<String>, turns: Vec<Turn>) -> Self {
        let domains = turns.iter().filter_map(|t| t.domain.clone()).collect();
        Dialogue {
            id: id.into(),
            turns,
            domains,
        }
    }

    pub fn refresh_domains(&mut self) {
        self.domains = self.turns.iter().filter_map(|t| t.domain.clone()).collect();
    }

    pub fn count_side(&self, side: Side) -> usize {
        self.turns.iter().filter(|t| side.includes(t.agent)).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub dialogues: Vec<Dialogue>,
    pub split: Split,
    pub source: Namespace,
    pub labeled: Labeling,
    pub provenance: LabelProvenance,
}

impl Corpus {
    pub fn new(source: Namespace, split: Split, labeled: Labeling, dialogues: Vec<Dialogue>) -> Self {
        Corpus {
            dialogues,
            split,
            source,
            labeled,
            provenance: LabelProvenance::Gold,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn n_turns(&self) -> usize {
        self.dialogues.iter().map(|d| d.turns.len()).sum()
    }

    pub fn count_side(&self, side: Side) -> usize {
        self.dialogues.iter().map(|d| d.count_side(side)).sum()
    }

    /// Same dialogues with every act list emptied.
    pub fn strip_labels(&self) -> Corpus {
        let mut out = self.clone();
        for d in &mut out.dialogues {
            for t in &mut d.turns {
                t.acts.clear();
            }
        }
        out.labeled = Labeling::Unlabeled;
        out
    }

    /// Concatenates corpora with the same namespace; ids must stay unique.
    pub fn concat(parts: &[&Corpus], split: Split) -> Result<Corpus> {
        let first = parts
            .first()
            .ok_or_else(|| CorpusError::Invalid("nothing to concatenate".into()))?;
        let mut dialogues = Vec::new();
        let mut labeled = first.labeled;
        let mut provenance = first.provenance;
        for p in parts {
            if p.source != first.source {
                return Err(CorpusError::Invalid(format!(
                    "cannot concatenate {} with {}",
                    first.source, p.source
                )));
            }
            labeled = match (labeled, p.labeled) {
                (a, b) if a == b => a,
                (Labeling::Unlabeled, _) | (_, Labeling::Unlabeled) => Labeling::Unlabeled,
                _ => Labeling::System,
            };
            if p.provenance == LabelProvenance::Estimated {
                provenance = LabelProvenance::Estimated;
            }
            dialogues.extend(p.dialogues.iter().cloned());
        }
        let corpus = Corpus {
            dialogues,
            split,
            source: first.source,
            labeled,
            provenance,
        };
        corpus.check()?;
        Ok(corpus)
    }

    /// Checks the structural invariants shared by every corpus.
    pub fn check(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for d in &self.dialogues {
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::Invalid(format!("duplicate dialogue id `{}`", d.id)));
            }
            if d.turns.is_empty() {
                return Err(CorpusError::Invalid(format!("dialogue `{}` has no turns", d.id)));
            }
            let domains: BTreeSet<String> = d.turns.iter().filter_map(|t| t.domain.clone()).collect();
            if domains != d.domains {
                return Err(CorpusError::Invalid(format!(
                    "dialogue `{}` domains differ from the union of its turn domains",
                    d.id
                )));
            }
            for (i, t) in d.turns.iter().enumerate() {
                if t.tokens != tokenize(&t.utterance) {
                    return Err(CorpusError::Invalid(format!(
                        "dialogue `{}` turn {i}: tokens do not match the utterance",
                        d.id
                    )));
                }
                if !self.labeled.covers(t.agent) && !t.acts.is_empty() {
                    return Err(CorpusError::Invalid(format!(
                        "dialogue `{}` turn {i}: acts on an unlabeled {} turn",
                        d.id, t.agent
                    )));
                }
                for (k, a) in t.acts.iter().enumerate() {
                    if a.name.is_empty() {
                        return Err(CorpusError::Invalid(format!(
                            "dialogue `{}` turn {i}: empty act name",
                            d.id
                        )));
                    }
                    if t.acts[..k].contains(a) {
                        return Err(CorpusError::Invalid(format!(
                            "dialogue `{}` turn {i}: duplicate act {a}",
                            d.id
                        )));
                    }
                    for (j, sv) in a.args.iter().enumerate() {
                        if sv.slot.is_empty() || sv.slot.chars().any(char::is_whitespace) {
                            return Err(CorpusError::Invalid(format!(
                                "dialogue `{}` turn {i}: bad slot name `{}`",
                                d.id, sv.slot
                            )));
                        }
                        if a.args[..j].contains(sv) {
                            return Err(CorpusError::Invalid(format!(
                                "dialogue `{}` turn {i}: duplicate argument in {a}",
                                d.id
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turn_dedups_acts() {
        let a = DialogueAct::universal("inform").with_arg("food", "thai");
        let t = Turn::new(Agent::User, "Thai food please.", vec![a.clone(), a]);
        assert_eq!(t.acts.len(), 1);
        assert_eq!(t.tokens, vec!["thai", "food", "please", "."]);
    }

    #[test]
    fn dialogue_domains_are_union_of_turns() {
        let d = Dialogue::new(
            "d1",
            vec![
                Turn::new(Agent::User, "a", vec![]).with_domain(Some("taxi".into())),
                Turn::new(Agent::System, "b", vec![]).with_domain(Some("hotel".into())),
                Turn::new(Agent::User, "c", vec![]),
            ],
        );
        assert_eq!(d.domains.iter().cloned().collect::<Vec<_>>(), vec!["hotel", "taxi"]);
    }

    #[test]
    fn check_rejects_duplicate_ids_and_stray_labels() {
        let t = Turn::new(Agent::User, "hi", vec![DialogueAct::universal("user-hi")]);
        let d = Dialogue::new("x", vec![t]);
        let c = Corpus::new(Namespace::Universal, Split::Train, Labeling::Both, vec![d.clone(), d.clone()]);
        assert!(c.check().is_err());
        let c = Corpus::new(Namespace::Universal, Split::Train, Labeling::System, vec![d]);
        assert!(c.check().is_err());
    }

    #[test]
    fn slot_names_are_canonicalised() {
        assert_eq!(SlotValue::new(" Leave At ", "7").slot, "leave_at");
    }

    #[test]
    fn namespace_parsing() {
        assert_eq!("dstc2".parse::<Namespace>().unwrap(), Namespace::Dstc2);
        assert_eq!("gsim-r".parse::<Namespace>().unwrap(), Namespace::GsimR);
        assert!(matches!("atis".parse::<Namespace>(), Err(CorpusError::UnknownDataset(_))));
    }
}
