use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rules::{glob_contains, ArgDisposition, OutputTemplate, SequenceCondition};
use super::{Result, RuleSet, SchemaError};
use crate::corpus::{Agent, Corpus, DialogueAct, Namespace, SlotValue, Turn};

/// What to do with a native act no rule covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmappedPolicy {
    #[default]
    Error,
    /// Drop the act and count it in the [`AlignReport`].
    Drop,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignReport {
    pub turns: usize,
    /// `namespace:act` → number of dropped occurrences.
    pub dropped: BTreeMap<String, usize>,
}

fn unmapped(namespace: Namespace, name: &str) -> SchemaError {
    SchemaError::UnmappedAct {
        namespace,
        name: name.to_string(),
        dialogue: None,
        turn: None,
    }
}

fn render(out: &OutputTemplate, args: &[SlotValue]) -> DialogueAct {
    let act = DialogueAct::universal(out.universal_act.clone());
    match out.arg_disposition {
        ArgDisposition::Drop => act,
        ArgDisposition::Keep | ArgDisposition::Move => act.with_args(args.iter().cloned()),
    }
}

/// Maps one native act through the unique matching rule.
///
/// Universal acts pass through unchanged. A MultiWOZ act is run through the
/// heuristic rows as if it were the only act of a turn with empty text.
pub fn align_act(act: &DialogueAct, agent: Agent, rules: &RuleSet) -> Result<Vec<DialogueAct>> {
    match act.namespace {
        Namespace::Universal => Ok(vec![act.clone()]),
        Namespace::Multiwoz => {
            let turn = Turn::new(agent, "", vec![act.clone()]);
            multiwoz_heuristic_acts(&turn, rules)
        }
        ns => {
            let mut found = rules.rules().filter(|(_, r)| r.matches(ns, &act.name, agent, &act.args));
            let (first, rule) = found.next().ok_or_else(|| unmapped(ns, &act.name))?;
            if let Some((second, _)) = found.next() {
                return Err(SchemaError::RuleConflict {
                    namespace: ns,
                    name: act.name.clone(),
                    first,
                    second,
                });
            }
            Ok(rule.outputs.iter().map(|o| render(o, &act.args)).collect())
        }
    }
}

fn push_unique(out: &mut Vec<DialogueAct>, act: DialogueAct) {
    if !out.contains(&act) {
        out.push(act);
    }
}

/// Universal acts for a whole turn: combination rules first, then every
/// remaining act through [`align_act`], deduplicated in order.
pub fn align_turn(turn: &Turn, namespace: Namespace, rules: &RuleSet) -> Result<Vec<DialogueAct>> {
    align_turn_with(turn, namespace, rules, UnmappedPolicy::Error, &mut AlignReport::default())
}

fn align_turn_with(
    turn: &Turn,
    namespace: Namespace,
    rules: &RuleSet,
    policy: UnmappedPolicy,
    report: &mut AlignReport,
) -> Result<Vec<DialogueAct>> {
    match namespace {
        Namespace::Universal => return Ok(turn.acts.clone()),
        Namespace::Multiwoz => return heuristics_with(turn, rules, policy, report),
        _ => {}
    }
    let mut remaining: Vec<&DialogueAct> = turn.acts.iter().collect();
    let mut out = Vec::new();
    for c in rules.combinations() {
        if c.source_namespace != namespace || c.agent_condition.is_some_and(|a| a != turn.agent) {
            continue;
        }
        if !c.source_acts.iter().all(|s| remaining.iter().any(|a| &a.name == s)) {
            continue;
        }
        let args: Vec<SlotValue> = remaining
            .iter()
            .filter(|a| c.source_acts.contains(&a.name))
            .flat_map(|a| a.args.iter().cloned())
            .collect();
        remaining.retain(|a| !c.source_acts.contains(&a.name));
        push_unique(&mut out, render(&c.output, &args));
    }
    for act in remaining {
        match align_act(act, turn.agent, rules) {
            Ok(acts) => acts.into_iter().for_each(|a| push_unique(&mut out, a)),
            Err(SchemaError::UnmappedAct { namespace, name, .. }) if policy == UnmappedPolicy::Drop => {
                *report.dropped.entry(format!("{namespace}:{name}")).or_default() += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Applies the MultiWOZ heuristic rows to a system turn. Each native act
/// emits the output of every row that lists it and whose text and sequence
/// conditions hold; outputs carry no arguments and are deduplicated. An act
/// listed in no row is an [`SchemaError::UnmappedAct`].
pub fn multiwoz_heuristic_acts(turn: &Turn, rules: &RuleSet) -> Result<Vec<DialogueAct>> {
    heuristics_with(turn, rules, UnmappedPolicy::Error, &mut AlignReport::default())
}

fn heuristics_with(
    turn: &Turn,
    rules: &RuleSet,
    policy: UnmappedPolicy,
    report: &mut AlignReport,
) -> Result<Vec<DialogueAct>> {
    let last = turn.acts.last();
    let ends_in = |p: &super::ActPattern| last.is_some_and(|a| p.matches(&a.name, &a.args));
    let mut out = Vec::new();
    for act in &turn.acts {
        if !rules.heuristic_covers(&act.name) {
            if policy == UnmappedPolicy::Drop {
                *report.dropped.entry(format!("{}:{}", Namespace::Multiwoz, act.name)).or_default() += 1;
                continue;
            }
            return Err(unmapped(Namespace::Multiwoz, &act.name));
        }
        for h in rules.heuristics().filter(|h| h.source_acts.contains(&act.name)) {
            if h.text_condition.as_deref().is_some_and(|p| !glob_contains(p, &turn.utterance)) {
                continue;
            }
            let seq_ok = match &h.act_sequence_condition {
                None => true,
                Some(SequenceCondition::EndsIn(p)) => ends_in(p),
                Some(SequenceCondition::NotEndsIn(p)) => !ends_in(p),
            };
            if seq_ok {
                push_unique(&mut out, DialogueAct::universal(h.output.clone()));
            }
        }
    }
    Ok(out)
}

/// Rewrites every turn into the universal namespace; text, agents and turn
/// order are untouched. Already-universal corpora are returned unchanged.
pub fn align_corpus(corpus: &Corpus, rules: &RuleSet) -> Result<Corpus> {
    align_corpus_with(corpus, rules, UnmappedPolicy::Error).map(|(c, _)| c)
}

pub fn align_corpus_with(corpus: &Corpus, rules: &RuleSet, policy: UnmappedPolicy) -> Result<(Corpus, AlignReport)> {
    let mut report = AlignReport::default();
    if corpus.source == Namespace::Universal {
        report.turns = corpus.n_turns();
        return Ok((corpus.clone(), report));
    }
    let mut out = corpus.clone();
    out.source = Namespace::Universal;
    for d in &mut out.dialogues {
        for (i, t) in d.turns.iter_mut().enumerate() {
            let acts = align_turn_with(t, corpus.source, rules, policy, &mut report).map_err(|e| match e {
                SchemaError::UnmappedAct { namespace, name, .. } => SchemaError::UnmappedAct {
                    namespace,
                    name,
                    dialogue: Some(d.id.clone()),
                    turn: Some(i),
                },
                other => other,
            })?;
            t.set_acts(acts);
            report.turns += 1;
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dialogue, Labeling, Split};
    use crate::schema::Mods;

    fn names(acts: &[DialogueAct]) -> Vec<&str> {
        acts.iter().map(|a| a.name.as_str()).collect()
    }

    #[test]
    fn role_split_follows_the_agent() {
        let r = RuleSet::default_v1();
        let neg = DialogueAct::new(Namespace::Dstc2, "negate");
        assert_eq!(names(&align_act(&neg, Agent::User, &r).unwrap()), ["user-negate"]);
        assert_eq!(names(&align_act(&neg, Agent::System, &r).unwrap()), ["sys-negate"]);
    }

    #[test]
    fn unknown_act_is_unmapped() {
        let r = RuleSet::default_v1();
        let act = DialogueAct::new(Namespace::GsimR, "good_bye");
        let err = align_act(&act, Agent::User, &r).unwrap_err();
        assert!(matches!(err, SchemaError::UnmappedAct { ref name, .. } if name == "good_bye"));
    }

    #[test]
    fn combination_consumes_inform() {
        let r = RuleSet::default_v1();
        let t = Turn::new(
            Agent::User,
            "anything else in the north",
            vec![
                DialogueAct::new(Namespace::Dstc2, "reqalts"),
                DialogueAct::new(Namespace::Dstc2, "inform").with_arg("area", "north"),
            ],
        );
        let got = align_turn(&t, Namespace::Dstc2, &r).unwrap();
        assert_eq!(got, vec![DialogueAct::universal("reqalts").with_arg("area", "north")]);
    }

    #[test]
    fn baseline_keeps_pre_merge_names() {
        let r = RuleSet::default_v1().with_mods(Mods::none());
        let sel = DialogueAct::new(Namespace::Dstc2, "select").with_arg("food", "thai");
        assert_eq!(names(&align_act(&sel, Agent::System, &r).unwrap()), ["sys-select"]);
        let req = DialogueAct::new(Namespace::Dstc2, "request");
        assert_eq!(names(&align_act(&req, Agent::User, &r).unwrap()), ["user-request"]);
        let more = DialogueAct::new(Namespace::Dstc2, "reqmore");
        assert_eq!(names(&align_act(&more, Agent::System, &r).unwrap()), ["reqmore"]);
        let aff = DialogueAct::new(Namespace::GsimR, "affirm").with_arg("time", "7pm");
        assert_eq!(align_act(&aff, Agent::User, &r).unwrap(), vec![DialogueAct::universal("affirm").with_arg("time", "7pm")]);
    }

    #[test]
    fn corpus_errors_carry_location_and_drop_policy_counts() {
        let r = RuleSet::default_v1();
        let turns = vec![
            Turn::new(Agent::System, "hi", vec![DialogueAct::new(Namespace::GsimR, "greeting")]),
            Turn::new(Agent::User, "bye", vec![DialogueAct::new(Namespace::GsimR, "good_bye")]),
        ];
        let c = Corpus::new(Namespace::GsimR, Split::Test, Labeling::Both, vec![Dialogue::new("d1", turns)]);
        let err = align_corpus(&c, &r).unwrap_err().to_string();
        assert!(err.contains("dialogue d1, turn 0"), "{err}");
        let mut c2 = c.clone();
        c2.dialogues[0].turns.remove(0);
        let (out, report) = align_corpus_with(&c2, &r, UnmappedPolicy::Drop).unwrap();
        assert!(out.dialogues[0].turns[0].acts.is_empty());
        assert_eq!(report.dropped["gsim_r:good_bye"], 1);
    }
}
