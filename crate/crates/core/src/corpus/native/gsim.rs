//! Google simulated dialogues (sim-R / sim-M): a JSON array of dialogues,
//! each turn holding an optional system utterance followed by a user one.

use std::path::Path;

use super::{read_json, Node};
use crate::corpus::{Agent, Corpus, Dialogue, DialogueAct, Labeling, Namespace, Result, SlotValue, Split, Turn};

pub(super) fn load(ns: Namespace, path: &Path, split: Split) -> Result<Corpus> {
    let json = read_json(path)?;
    let root = Node::root(&json, path);
    let domain = match ns {
        Namespace::GsimM => "movie",
        _ => "restaurant",
    };
    let mut dialogues = Vec::new();
    for d in root.items()? {
        let id = d.get("dialogue_id")?.text()?;
        let d = d.in_dialogue(&id);
        let mut turns = Vec::new();
        for t in d.get("turns")?.items()? {
            for (agent, acts_key, utt_key) in [
                (Agent::System, "system_acts", "system_utterance"),
                (Agent::User, "user_acts", "user_utterance"),
            ] {
                let Some(utt) = t.opt(utt_key) else { continue };
                let text = utt.get("text")?.str()?;
                let spans = slot_spans(&utt)?;
                let mut acts = Vec::new();
                if let Some(list) = t.opt(acts_key) {
                    for a in list.items()? {
                        acts.push(parse_act(ns, &a, &spans)?);
                    }
                }
                turns.push(Turn::new(agent, text, acts).with_domain(Some(domain.to_string())));
            }
        }
        if turns.is_empty() {
            return Err(d.error("dialogue has no utterances"));
        }
        dialogues.push(Dialogue::new(id, turns));
    }
    Ok(Corpus::new(ns, split, Labeling::Both, dialogues))
}

/// (slot, surface value) pairs recovered from token spans of the utterance.
fn slot_spans(utt: &Node<'_>) -> Result<Vec<(String, String)>> {
    let Some(slots) = utt.opt("slots") else {
        return Ok(Vec::new());
    };
    let tokens: Vec<String> = match utt.opt("tokens") {
        Some(t) => t.items()?.iter().map(|n| n.text()).collect::<Result<_>>()?,
        None => utt.get("text")?.str()?.split_whitespace().map(String::from).collect(),
    };
    let mut out = Vec::new();
    for s in slots.items()? {
        let slot = s.get("slot")?.str()?;
        let start = s.get("start")?.usize()?;
        let end = s.get("exclusive_end")?.usize()?;
        if start > end || end > tokens.len() {
            return Err(s.error(format!("span {start}..{end} outside {} tokens", tokens.len())));
        }
        out.push((slot.to_lowercase(), tokens[start..end].join(" ")));
    }
    Ok(out)
}

fn parse_act(ns: Namespace, a: &Node<'_>, spans: &[(String, String)]) -> Result<DialogueAct> {
    let name = a.get("type")?.str()?.to_lowercase();
    let mut act = DialogueAct::new(ns, name);
    if let Some(slot) = a.opt("slot") {
        let slot = slot.str()?;
        let explicit = a.opt("value").map(|v| v.text()).transpose()?;
        let values: Vec<String> = match explicit {
            Some(v) => vec![v],
            None => spans
                .iter()
                .filter(|(s, _)| s.eq_ignore_ascii_case(slot))
                .map(|(_, v)| v.clone())
                .collect(),
        };
        if values.is_empty() {
            act = act.with_args([SlotValue::new(slot, "")]);
        }
        for v in values {
            act = act.with_arg(slot, v);
        }
    }
    Ok(act)
}
