use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{act_role, normalize_act_name, LabelSpace, Mod, Mods, Result, SchemaError, UNIVERSAL_ACTS};
use crate::corpus::{Agent, Namespace, SlotValue};

pub const RULE_SCHEMA_VERSION: u32 = 1;

/// The shipped rule file.
pub const DEFAULT_RULES: &str = include_str!("universal_v1.json");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgCondition {
    #[default]
    Any,
    HasArgs,
    NoArgs,
}

impl ArgCondition {
    pub fn matches(self, args: &[SlotValue]) -> bool {
        match self {
            ArgCondition::Any => true,
            ArgCondition::HasArgs => !args.is_empty(),
            ArgCondition::NoArgs => args.is_empty(),
        }
    }

    fn overlaps(self, other: ArgCondition) -> bool {
        use ArgCondition::*;
        !matches!((self, other), (HasArgs, NoArgs) | (NoArgs, HasArgs))
    }
}

/// What happens to the source act's arguments on one output.
/// `move` is used when a sibling output drops them; both `keep` and `move`
/// copy the arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgDisposition {
    Keep,
    Drop,
    Move,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTemplate {
    pub universal_act: String,
    pub arg_disposition: ArgDisposition,
}

/// Activates a rule only while a modification is in the given state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModGate {
    #[serde(rename = "mod")]
    pub modification: Mod,
    pub enabled: bool,
}

fn gate_open(gate: &Option<ModGate>, mods: Mods) -> bool {
    gate.is_none_or(|g| mods.is_enabled(g.modification) == g.enabled)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentRule {
    pub source_namespace: Namespace,
    pub source_act_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_condition: Option<Agent>,
    #[serde(default)]
    pub arg_condition: ArgCondition,
    pub outputs: Vec<OutputTemplate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<ModGate>,
}

impl AlignmentRule {
    pub fn matches(&self, namespace: Namespace, name: &str, agent: Agent, args: &[SlotValue]) -> bool {
        self.source_namespace == namespace
            && self.source_act_name == name
            && self.agent_condition.is_none_or(|a| a == agent)
            && self.arg_condition.matches(args)
    }

    fn overlaps(&self, other: &AlignmentRule) -> bool {
        self.source_namespace == other.source_namespace
            && self.source_act_name == other.source_act_name
            && match (self.agent_condition, other.agent_condition) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            }
            && self.arg_condition.overlaps(other.arg_condition)
    }
}

/// Several native acts co-occurring on one turn that collapse into a single
/// universal act carrying the union of their arguments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinationRule {
    pub source_namespace: Namespace,
    pub source_acts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_condition: Option<Agent>,
    pub output: OutputTemplate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<ModGate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActPattern {
    pub act: String,
    /// When present the act's arguments must equal this list exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub args: Option<Vec<SlotValue>>,
}

impl ActPattern {
    pub fn matches(&self, name: &str, args: &[SlotValue]) -> bool {
        self.act == name && self.args.as_deref().is_none_or(|want| want == args)
    }
}

/// Predicate on the turn's full native act list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "pattern", rename_all = "snake_case")]
pub enum SequenceCondition {
    EndsIn(ActPattern),
    NotEndsIn(ActPattern),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicRule {
    pub source_acts: Vec<String>,
    /// Literal text with `*` wildcards, matched case-insensitively anywhere
    /// in the utterance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act_sequence_condition: Option<SequenceCondition>,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<ModGate>,
}

/// Case-insensitive ordered-substring match of the `*`-separated pieces.
pub(crate) fn glob_contains(pattern: &str, text: &str) -> bool {
    let text = text.to_lowercase();
    let mut at = 0;
    for piece in pattern.to_lowercase().split('*').filter(|p| !p.is_empty()) {
        match text[at..].find(piece) {
            Some(i) => at += i + piece.len(),
            None => return false,
        }
    }
    true
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModLabels {
    #[serde(default)]
    disabled_add: Vec<String>,
    #[serde(default)]
    disabled_remove: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    schema_version: u32,
    version: String,
    universal_acts: Vec<String>,
    #[serde(default)]
    mods: BTreeMap<Mod, ModLabels>,
    rules: Vec<AlignmentRule>,
    #[serde(default)]
    combinations: Vec<CombinationRule>,
    #[serde(default)]
    heuristics: Vec<HeuristicRule>,
}

/// A validated, immutable rule set under one modification setting.
#[derive(Clone, Debug)]
pub struct RuleSet {
    version: String,
    digest: String,
    mod_labels: BTreeMap<Mod, ModLabels>,
    rules: Vec<AlignmentRule>,
    combinations: Vec<CombinationRule>,
    heuristics: Vec<HeuristicRule>,
    mods: Mods,
    labels: LabelSpace,
}

impl RuleSet {
    /// The shipped rules with every modification enabled.
    pub fn default_v1() -> Self {
        Self::from_json_str(DEFAULT_RULES).expect("shipped rule file is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: RuleFile = serde_json::from_str(text)
            .map_err(|e| SchemaError::RuleFile(format!("line {} column {}: {e}", e.line(), e.column())))?;
        if file.schema_version != RULE_SCHEMA_VERSION {
            return Err(SchemaError::RuleFile(format!(
                "schema_version {} (expected {RULE_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let universal: Vec<String> = file.universal_acts.iter().map(|a| normalize_act_name(a)).collect();
        if universal != UNIVERSAL_ACTS {
            return Err(SchemaError::RuleFile(
                "universal_acts must list the twenty universal acts in canonical order".into(),
            ));
        }
        let norm = |v: &[String]| v.iter().map(|a| normalize_act_name(a)).collect::<Vec<_>>();
        let mod_labels = file
            .mods
            .into_iter()
            .map(|(m, l)| {
                (
                    m,
                    ModLabels {
                        disabled_add: norm(&l.disabled_add),
                        disabled_remove: norm(&l.disabled_remove),
                    },
                )
            })
            .collect();
        let mut rules = file.rules;
        for r in &mut rules {
            for o in &mut r.outputs {
                o.universal_act = normalize_act_name(&o.universal_act);
            }
        }
        let mut combinations = file.combinations;
        for c in &mut combinations {
            c.output.universal_act = normalize_act_name(&c.output.universal_act);
        }
        let mut heuristics = file.heuristics;
        for h in &mut heuristics {
            h.output = normalize_act_name(&h.output);
        }
        let mut set = RuleSet {
            version: file.version,
            digest: hex::encode(Sha256::digest(text.as_bytes())),
            mod_labels,
            rules,
            combinations,
            heuristics,
            mods: Mods::all(),
            labels: LabelSpace::universal(),
        };
        for mods in Mods::combinations() {
            set.check(mods)?;
        }
        set.labels = set.label_space_for(Mods::all());
        Ok(set)
    }

    /// The same rules under another modification setting.
    pub fn with_mods(&self, mods: Mods) -> Self {
        let mut out = self.clone();
        out.labels = out.label_space_for(mods);
        out.mods = mods;
        out
    }

    fn label_space_for(&self, mods: Mods) -> LabelSpace {
        let mut names: Vec<String> = UNIVERSAL_ACTS.iter().map(|s| s.to_string()).collect();
        for (m, l) in &self.mod_labels {
            if !mods.is_enabled(*m) {
                names.retain(|n| !l.disabled_remove.contains(n));
                names.extend(l.disabled_add.iter().cloned());
            }
        }
        LabelSpace::new(names)
    }

    fn check(&self, mods: Mods) -> Result<()> {
        let labels = self.label_space_for(mods);
        let bad = |m: String| Err(SchemaError::RuleFile(format!("{m} (with {mods:?})")));
        let check_output = |out: &str, agent: Option<Agent>, what: &str| -> Result<()> {
            if !labels.contains(out) {
                return bad(format!("{what}: `{out}` is not in the label space"));
            }
            if let Some(role) = act_role(out) {
                if agent != Some(role) {
                    return bad(format!("{what}: `{out}` requires agent condition {role}"));
                }
            }
            Ok(())
        };
        let active: Vec<(usize, &AlignmentRule)> =
            self.rules.iter().enumerate().filter(|(_, r)| gate_open(&r.when, mods)).collect();
        for (i, r) in &active {
            let what = format!("rule {i} ({} {})", r.source_namespace, r.source_act_name);
            if r.source_namespace == Namespace::Universal {
                return bad(format!("{what}: rules cannot read the universal namespace"));
            }
            if r.outputs.is_empty() {
                return bad(format!("{what}: no outputs"));
            }
            for o in &r.outputs {
                check_output(&o.universal_act, r.agent_condition, &what)?;
            }
        }
        for (k, (i, a)) in active.iter().enumerate() {
            for (j, b) in &active[k + 1..] {
                if a.overlaps(b) {
                    return Err(SchemaError::RuleConflict {
                        namespace: a.source_namespace,
                        name: a.source_act_name.clone(),
                        first: *i,
                        second: *j,
                    });
                }
            }
        }
        for (i, c) in self.combinations.iter().enumerate().filter(|(_, c)| gate_open(&c.when, mods)) {
            let what = format!("combination {i}");
            if c.source_acts.len() < 2 {
                return bad(format!("{what}: needs at least two source acts"));
            }
            check_output(&c.output.universal_act, c.agent_condition, &what)?;
        }
        for (i, h) in self.heuristics.iter().enumerate().filter(|(_, h)| gate_open(&h.when, mods)) {
            let what = format!("heuristic {i}");
            if h.source_acts.is_empty() {
                return bad(format!("{what}: no source acts"));
            }
            check_output(&h.output, Some(Agent::System), &what)?;
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// SHA-256 of the rule file text.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn mods(&self) -> Mods {
        self.mods
    }

    /// Target label space under the current modification setting.
    pub fn label_space(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn rules(&self) -> impl Iterator<Item = (usize, &AlignmentRule)> {
        self.rules.iter().enumerate().filter(|(_, r)| gate_open(&r.when, self.mods))
    }

    pub fn combinations(&self) -> impl Iterator<Item = &CombinationRule> {
        self.combinations.iter().filter(|c| gate_open(&c.when, self.mods))
    }

    pub fn heuristics(&self) -> impl Iterator<Item = &HeuristicRule> {
        self.heuristics.iter().filter(|h| gate_open(&h.when, self.mods))
    }

    /// Whether any active heuristic row lists the MultiWOZ act.
    pub fn heuristic_covers(&self, name: &str) -> bool {
        self.heuristics().any(|h| h.source_acts.iter().any(|a| a == name))
    }
}
