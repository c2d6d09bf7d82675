//! DSTC2: one directory per call holding `log.json` (system side) and
//! `label.json` (user side). The path may be a data directory, which is
//! searched recursively, or an `.flist` file listing call directories.

use std::fs;
use std::path::{Path, PathBuf};

use super::{read_json, sorted_files, Node};
use crate::corpus::{Agent, Corpus, CorpusError, Dialogue, DialogueAct, Labeling, Namespace, Result, SlotValue, Split, Turn};

const DOMAIN: &str = "restaurant";

pub(super) fn load(path: &Path, split: Split) -> Result<Corpus> {
    let calls = call_dirs(path)?;
    let mut dialogues = Vec::with_capacity(calls.len());
    for dir in calls {
        dialogues.push(load_call(&dir)?);
    }
    Ok(Corpus::new(Namespace::Dstc2, split, Labeling::Both, dialogues))
}

fn call_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        return Ok(sorted_files(path, "log.json")
            .into_iter()
            .filter_map(|p| p.parent().map(Path::to_path_buf))
            .collect());
    }
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let roots = [base.to_path_buf(), base.join("data"), base.join("../data"), base.join("../../data")];
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let dir = roots
            .iter()
            .map(|r| r.join(line))
            .find(|d| d.join("log.json").is_file())
            .ok_or_else(|| CorpusError::Format {
                file: path.to_path_buf(),
                json_path: format!("line {}", lineno + 1),
                dialogue: Some(line.to_string()),
                message: "call directory with log.json not found".into(),
            })?;
        out.push(dir);
    }
    Ok(out)
}

fn load_call(dir: &Path) -> Result<Dialogue> {
    let log_path = dir.join("log.json");
    let label_path = dir.join("label.json");
    let log = read_json(&log_path)?;
    let label = read_json(&label_path)?;
    let log_root = Node::root(&log, &log_path);
    let id = log_root.get("session-id")?.text()?;
    let log_root = log_root.in_dialogue(&id);
    let label_root = Node::root(&label, &label_path).in_dialogue(&id);

    let sys_turns = log_root.get("turns")?.items()?;
    let user_turns = label_root.get("turns")?.items()?;
    if sys_turns.len() != user_turns.len() {
        return Err(label_root.get("turns")?.error(format!(
            "{} user turns for {} system turns",
            user_turns.len(),
            sys_turns.len()
        )));
    }
    let mut turns = Vec::with_capacity(2 * sys_turns.len());
    for (s, u) in sys_turns.iter().zip(&user_turns) {
        let out = s.get("output")?;
        let mut acts = Vec::new();
        for a in out.get("dialog-acts")?.items()? {
            if let Some(act) = parse_act(&a)? {
                acts.push(act);
            }
        }
        turns.push(Turn::new(Agent::System, out.get("transcript")?.str()?, acts).with_domain(Some(DOMAIN.into())));

        let mut acts = Vec::new();
        for a in u.get("semantics")?.get("json")?.items()? {
            if let Some(act) = parse_act(&a)? {
                acts.push(act);
            }
        }
        turns.push(Turn::new(Agent::User, u.get("transcription")?.str()?, acts).with_domain(Some(DOMAIN.into())));
    }
    Ok(Dialogue::new(id, turns))
}

/// `null` marks a turn without semantic content and yields no act.
fn parse_act(a: &Node<'_>) -> Result<Option<DialogueAct>> {
    let name = a.get("act")?.str()?;
    if name == "null" {
        return Ok(None);
    }
    let mut act = DialogueAct::new(Namespace::Dstc2, name);
    if let Some(slots) = a.opt("slots") {
        for pair in slots.items()? {
            let kv = pair.items()?;
            if kv.len() != 2 {
                return Err(pair.error("expected a [slot, value] pair"));
            }
            let (slot, value) = (kv[0].text()?, kv[1].text()?);
            // request(x) is written as [["slot", x]]
            act = if slot == "slot" {
                act.with_args([SlotValue::new(&value, "")])
            } else {
                act.with_arg(&slot, value)
            };
        }
    }
    Ok(Some(act))
}
