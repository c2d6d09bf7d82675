//! Canonical JSON-lines corpus format.
//!
//! Line 1 is a header object carrying `schema_version` and the corpus-level
//! fields; every following line is one dialogue. All objects are written with
//! sorted keys and no insignificant whitespace, so equal corpora produce equal
//! bytes.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Corpus, CorpusError, Dialogue, LabelProvenance, Labeling, Namespace, Result, Split, TOKENIZER_ID};

pub const SCHEMA_VERSION: u32 = 1;
const KIND: &str = "udat-corpus";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    schema_version: u32,
    split: Split,
    source: Namespace,
    labeled: Labeling,
    provenance: LabelProvenance,
    tokenizer: String,
}

/// Recursively sorts object keys.
pub(crate) fn sorted(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sorted(v))).collect::<Map<_, _>>())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

pub(crate) fn to_sorted_line<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("corpus types always serialize");
    serde_json::to_string(&sorted(v)).expect("values always serialize")
}

pub fn write_canonical<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    let header = Header {
        kind: KIND.to_string(),
        schema_version: SCHEMA_VERSION,
        split: corpus.split,
        source: corpus.source,
        labeled: corpus.labeled,
        provenance: corpus.provenance,
        tokenizer: TOKENIZER_ID.to_string(),
    };
    writeln!(out, "{}", to_sorted_line(&header))?;
    for d in &corpus.dialogues {
        writeln!(out, "{}", to_sorted_line(d))?;
    }
    out.flush()
}

/// Validates the corpus and writes it to `path`.
pub fn save_canonical(corpus: &Corpus, path: &Path) -> Result<()> {
    corpus.check()?;
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    write_canonical(corpus, &mut buf).map_err(io)?;
    fs::write(path, buf).map_err(io)
}

pub fn load_canonical(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_canonical(file, path)
}

/// Reads a canonical corpus; `origin` is only used in error messages.
pub fn read_canonical<R: Read>(reader: R, origin: &Path) -> Result<Corpus> {
    let reader = BufReader::new(reader);
    let mut header: Option<Header> = None;
    let mut dialogues = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: origin.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let syntax = |e: serde_json::Error| CorpusError::Syntax {
            file: origin.to_path_buf(),
            line: lineno,
            column: e.column(),
            message: e.to_string(),
        };
        match &header {
            None => {
                let h: Header = serde_json::from_str(&line).map_err(syntax)?;
                if h.kind != KIND {
                    return Err(CorpusError::Invalid(format!("not a canonical corpus (kind `{}`)", h.kind)));
                }
                if h.schema_version != SCHEMA_VERSION {
                    return Err(CorpusError::SchemaVersion {
                        found: h.schema_version,
                        expected: SCHEMA_VERSION,
                    });
                }
                if h.tokenizer != TOKENIZER_ID {
                    return Err(CorpusError::Invalid(format!(
                        "corpus was tokenized with `{}`, this build uses `{TOKENIZER_ID}`",
                        h.tokenizer
                    )));
                }
                header = Some(h);
            }
            Some(_) => {
                let d: Dialogue = serde_json::from_str(&line).map_err(syntax)?;
                dialogues.push(d);
            }
        }
    }
    let h = header.ok_or_else(|| CorpusError::Invalid(format!("{}: missing header line", origin.display())))?;
    let corpus = Corpus {
        dialogues,
        split: h.split,
        source: h.source,
        labeled: h.labeled,
        provenance: h.provenance,
    };
    corpus.check()?;
    Ok(corpus)
}
