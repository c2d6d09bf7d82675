//! MultiWOZ 2.0: `data.json` maps dialogue file names to logs that alternate
//! user and system turns. System acts come from the per-turn `dialog_act`
//! field when present, otherwise from a sibling `dialogue_acts.json` keyed
//! by dialogue id and 1-based system-turn number. User turns carry no acts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{read_json, Node};
use crate::corpus::{Agent, Corpus, Dialogue, DialogueAct, Labeling, Namespace, Result, Split, Turn};

const NON_DOMAINS: [&str; 2] = ["general", "booking"];

pub(super) fn load(path: &Path, split: Option<Split>) -> Result<Corpus> {
    let (data_path, dir) = if path.is_dir() {
        (path.join("data.json"), path.to_path_buf())
    } else {
        (path.to_path_buf(), path.parent().unwrap_or(Path::new(".")).to_path_buf())
    };
    let data = read_json(&data_path)?;
    let acts_path = dir.join("dialogue_acts.json");
    let acts_json = if acts_path.is_file() { Some(read_json(&acts_path)?) } else { None };
    let acts_root = acts_json.as_ref().map(|v| Node::root(v, &acts_path));

    let selector = match split {
        None => None,
        Some(s) => Some((s, read_list(&dir.join("valListFile.json"))?, read_list(&dir.join("testListFile.json"))?)),
    };

    let root = Node::root(&data, &data_path);
    let mut dialogues = Vec::new();
    for (file_id, entry) in root.entries()? {
        let id = file_id.trim_end_matches(".json").to_string();
        if let Some((want, val, test)) = &selector {
            let actual = if test.contains(&id) {
                Split::Test
            } else if val.contains(&id) {
                Split::Dev
            } else {
                Split::Train
            };
            if actual != *want {
                continue;
            }
        }
        let entry = entry.in_dialogue(&id);
        let turn_acts = acts_root.as_ref().and_then(|r| r.opt(&id).map(|n| n.in_dialogue(&id)));
        let mut turns = Vec::new();
        for (i, t) in entry.get("log")?.items()?.iter().enumerate() {
            let text = t.get("text")?.str()?;
            if i % 2 == 0 {
                turns.push(Turn::new(Agent::User, text, Vec::new()));
                continue;
            }
            let source = match t.opt("dialog_act") {
                Some(n) => Some(n),
                None => turn_acts.as_ref().and_then(|n| n.opt(&i.div_ceil(2).to_string())),
            };
            let acts = match source {
                Some(n) => parse_acts(&n)?,
                None => Vec::new(),
            };
            let domain = acts.iter().find_map(|a| {
                let (prefix, _) = a.name.split_once('-')?;
                let p = prefix.to_lowercase();
                (!NON_DOMAINS.contains(&p.as_str())).then_some(p)
            });
            turns.push(Turn::new(Agent::System, text, acts).with_domain(domain));
        }
        if turns.is_empty() {
            return Err(entry.error("empty log"));
        }
        dialogues.push(Dialogue::new(id, turns));
    }
    Ok(Corpus::new(
        Namespace::Multiwoz,
        split.unwrap_or(Split::Train),
        Labeling::System,
        dialogues,
    ))
}

/// Acts in file order; `"No Annotation"` yields none.
fn parse_acts(n: &Node<'_>) -> Result<Vec<DialogueAct>> {
    if let Value::String(_) = n.value {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (name, args) in n.entries()? {
        let mut act = DialogueAct::new(Namespace::Multiwoz, name);
        for pair in args.items()? {
            let kv = pair.items()?;
            if kv.len() != 2 {
                return Err(pair.error("expected a [slot, value] pair"));
            }
            act = act.with_arg(&kv[0].text()?, kv[1].text()?);
        }
        out.push(act);
    }
    Ok(out)
}

fn read_list(path: &PathBuf) -> Result<BTreeSet<String>> {
    if !path.is_file() {
        return Ok(BTreeSet::new());
    }
    let text = std::fs::read_to_string(path).map_err(|source| crate::corpus::CorpusError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(text
        .lines()
        .map(|l| l.trim().trim_end_matches(".json").to_string())
        .filter(|l| !l.is_empty())
        .collect())
}
