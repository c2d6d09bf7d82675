//! The universal act inventory and the declarative engine that maps native
//! annotations onto it.
//!
//! A [`RuleSet`] is loaded from a versioned JSON rule file. Rules may be
//! gated on one of four merge/split modifications ([`Mod`]); disabling a
//! modification restores the pre-merge act names and extends the
//! [`LabelSpace`] accordingly, which is how the manually-aligned baseline is
//! obtained from the same file.

mod align;
pub mod fixtures;
mod rules;
mod validate;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Agent, Namespace};

pub use align::{align_act, align_corpus, align_corpus_with, align_turn, multiwoz_heuristic_acts, AlignReport, UnmappedPolicy};
pub use rules::{
    ActPattern, AlignmentRule, ArgCondition, ArgDisposition, CombinationRule, HeuristicRule, ModGate, OutputTemplate,
    RuleSet, SequenceCondition, DEFAULT_RULES, RULE_SCHEMA_VERSION,
};
pub use validate::{validate_against, validate_universal, Violation, ViolationKind};

/// The twenty universal acts in canonical index order.
pub const UNIVERSAL_ACTS: [&str; 20] = [
    "ack",
    "affirm",
    "bye",
    "deny",
    "inform",
    "repeat",
    "reqalts",
    "request",
    "restart",
    "thank-you",
    "user-confirm",
    "sys-impl-confirm",
    "sys-expl-confirm",
    "sys-hi",
    "user-hi",
    "sys-negate",
    "user-negate",
    "sys-notify-failure",
    "sys-notify-success",
    "sys-offer",
];

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("no rule maps {namespace} act `{name}`{}", location(.dialogue, .turn))]
    UnmappedAct {
        namespace: Namespace,
        name: String,
        dialogue: Option<String>,
        turn: Option<usize>,
    },
    #[error("rules {first} and {second} both match {namespace} act `{name}`")]
    RuleConflict {
        namespace: Namespace,
        name: String,
        first: usize,
        second: usize,
    },
    #[error("invalid rule file: {0}")]
    RuleFile(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Corpus(#[from] crate::corpus::CorpusError),
}

fn location(dialogue: &Option<String>, turn: &Option<usize>) -> String {
    match (dialogue, turn) {
        (Some(d), Some(t)) => format!(" (dialogue {d}, turn {t})"),
        (Some(d), None) => format!(" (dialogue {d})"),
        _ => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, SchemaError>;

/// Hyphenated lowercase form used for every universal act name.
pub fn normalize_act_name(name: &str) -> String {
    name.trim().to_lowercase().replace('_', "-")
}

/// Which agent an act name is reserved for, if any.
pub fn act_role(name: &str) -> Option<Agent> {
    if name.starts_with("sys-") {
        Some(Agent::System)
    } else if name.starts_with("user-") {
        Some(Agent::User)
    } else {
        None
    }
}

/// Ordered act names; the order fixes many-hot vector indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSpace {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new(names: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut out = LabelSpace {
            names: Vec::new(),
            index: HashMap::new(),
        };
        for n in names {
            let n = n.into();
            if !out.index.contains_key(&n) {
                out.index.insert(n.clone(), out.names.len());
                out.names.push(n);
            }
        }
        out
    }

    pub fn universal() -> Self {
        Self::new(UNIVERSAL_ACTS)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}

impl From<Vec<String>> for LabelSpace {
    fn from(v: Vec<String>) -> Self {
        LabelSpace::new(v)
    }
}

impl From<LabelSpace> for Vec<String> {
    fn from(l: LabelSpace) -> Self {
        l.names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mod {
    /// offer/select merged into sys-offer
    Mod1,
    /// user-request/sys-request merged into request
    Mod2,
    /// affirm(x=y) split into affirm + inform(x=y)
    Mod3,
    /// reqmore merged into reqalts
    Mod4,
}

impl Mod {
    pub const ALL: [Mod; 4] = [Mod::Mod1, Mod::Mod2, Mod::Mod3, Mod::Mod4];

    pub fn as_str(self) -> &'static str {
        match self {
            Mod::Mod1 => "mod1",
            Mod::Mod2 => "mod2",
            Mod::Mod3 => "mod3",
            Mod::Mod4 => "mod4",
        }
    }
}

impl fmt::Display for Mod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mod {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self> {
        Mod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SchemaError::RuleFile(format!("unknown modification `{s}`")))
    }
}

/// Enabled/disabled state of the four modifications.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mods {
    pub mod1: bool,
    pub mod2: bool,
    pub mod3: bool,
    pub mod4: bool,
}

impl Default for Mods {
    fn default() -> Self {
        Mods::all()
    }
}

impl Mods {
    pub fn all() -> Self {
        Mods {
            mod1: true,
            mod2: true,
            mod3: true,
            mod4: true,
        }
    }

    /// The manually-aligned baseline.
    pub fn none() -> Self {
        Mods {
            mod1: false,
            mod2: false,
            mod3: false,
            mod4: false,
        }
    }

    pub fn is_enabled(&self, m: Mod) -> bool {
        match m {
            Mod::Mod1 => self.mod1,
            Mod::Mod2 => self.mod2,
            Mod::Mod3 => self.mod3,
            Mod::Mod4 => self.mod4,
        }
    }

    pub fn with(mut self, m: Mod, enabled: bool) -> Self {
        *match m {
            Mod::Mod1 => &mut self.mod1,
            Mod::Mod2 => &mut self.mod2,
            Mod::Mod3 => &mut self.mod3,
            Mod::Mod4 => &mut self.mod4,
        } = enabled;
        self
    }

    /// The cumulative ablation sequence: none, +Mod1, ..., +Mod4.
    pub fn cumulative() -> [Mods; 5] {
        let mut out = [Mods::none(); 5];
        for (i, m) in Mod::ALL.into_iter().enumerate() {
            out[i + 1] = out[i].with(m, true);
        }
        out
    }

    /// Every one of the sixteen combinations.
    pub fn combinations() -> impl Iterator<Item = Mods> {
        (0u8..16).map(|bits| {
            Mod::ALL
                .into_iter()
                .enumerate()
                .fold(Mods::none(), |acc, (i, m)| acc.with(m, bits & (1 << i) != 0))
        })
    }
}
