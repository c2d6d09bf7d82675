//! Readers for the public distribution layouts of the native datasets.

mod dstc2;
mod gsim;
mod multiwoz;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{Corpus, CorpusError, Namespace, Result, Split};

/// Loads a native dataset, inferring the split from the path name.
pub fn load_native(dataset: Namespace, path: &Path) -> Result<Corpus> {
    load_native_split(dataset, path, None)
}

/// Loads a native dataset. For MultiWOZ an explicit split selects dialogues
/// through the `valListFile.json` / `testListFile.json` lists next to `data.json`;
/// for the other datasets it only overrides the recorded split.
pub fn load_native_split(dataset: Namespace, path: &Path, split: Option<Split>) -> Result<Corpus> {
    let split_hint = split.unwrap_or_else(|| split_from_name(path));
    let corpus = match dataset {
        Namespace::GsimR | Namespace::GsimM => gsim::load(dataset, path, split_hint)?,
        Namespace::Dstc2 => dstc2::load(path, split_hint)?,
        Namespace::Multiwoz => multiwoz::load(path, split)?,
        Namespace::Universal => return Err(CorpusError::UnknownDataset("universal".into())),
    };
    corpus.check()?;
    Ok(corpus)
}

fn split_from_name(path: &Path) -> Split {
    let name = path.to_string_lossy().to_lowercase();
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    for candidate in [file.as_str(), name.as_str()] {
        if candidate.contains("test") {
            return Split::Test;
        }
        if candidate.contains("dev") || candidate.contains("val") {
            return Split::Dev;
        }
        if candidate.contains("train") {
            return Split::Train;
        }
    }
    Split::Train
}

pub(crate) fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Syntax {
        file: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// A JSON value together with its location, so every adapter error can name
/// the file, the JSON path and the dialogue being read.
#[derive(Clone, Debug)]
pub(crate) struct Node<'a> {
    pub value: &'a Value,
    pub path: String,
    file: &'a Path,
    dialogue: Option<String>,
}

impl<'a> Node<'a> {
    pub fn root(value: &'a Value, file: &'a Path) -> Self {
        Node {
            value,
            path: "$".into(),
            file,
            dialogue: None,
        }
    }

    pub fn in_dialogue(mut self, id: &str) -> Self {
        self.dialogue = Some(id.to_string());
        self
    }

    pub fn error(&self, message: impl Into<String>) -> CorpusError {
        CorpusError::Format {
            file: self.file.to_path_buf(),
            json_path: self.path.clone(),
            dialogue: self.dialogue.clone(),
            message: message.into(),
        }
    }

    fn child(&self, value: &'a Value, segment: String) -> Node<'a> {
        Node {
            value,
            path: format!("{}{}", self.path, segment),
            file: self.file,
            dialogue: self.dialogue.clone(),
        }
    }

    pub fn opt(&self, key: &str) -> Option<Node<'a>> {
        match self.value.get(key) {
            None | Some(Value::Null) => None,
            Some(v) => Some(self.child(v, format!(".{key}"))),
        }
    }

    pub fn get(&self, key: &str) -> Result<Node<'a>> {
        self.opt(key).ok_or_else(|| self.error(format!("missing key `{key}`")))
    }

    pub fn items(&self) -> Result<Vec<Node<'a>>> {
        let arr = self
            .value
            .as_array()
            .ok_or_else(|| self.error("expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, v)| self.child(v, format!("[{i}]")))
            .collect())
    }

    pub fn entries(&self) -> Result<Vec<(&'a str, Node<'a>)>> {
        let obj = self
            .value
            .as_object()
            .ok_or_else(|| self.error("expected an object"))?;
        Ok(obj
            .iter()
            .map(|(k, v)| (k.as_str(), self.child(v, format!("[{k:?}]"))))
            .collect())
    }

    pub fn str(&self) -> Result<&'a str> {
        self.value.as_str().ok_or_else(|| self.error("expected a string"))
    }

    /// Strings as-is, numbers and booleans rendered to text.
    pub fn text(&self) -> Result<String> {
        match self.value {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            _ => Err(self.error("expected a scalar")),
        }
    }

    pub fn usize(&self) -> Result<usize> {
        self.value
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| self.error("expected a non-negative integer"))
    }
}

pub(crate) fn sorted_files(root: &Path, file_name: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() == file_name)
        .map(|e| e.into_path())
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_inference() {
        assert_eq!(split_from_name(Path::new("sim-R/test.json")), Split::Test);
        assert_eq!(split_from_name(Path::new("x/dstc2_dev.flist")), Split::Dev);
        assert_eq!(split_from_name(Path::new("x/data.json")), Split::Train);
    }

    #[test]
    fn node_paths() {
        let v: Value = serde_json::from_str(r#"{"a":[{"b":1}]}"#).unwrap();
        let root = Node::root(&v, Path::new("f.json"));
        let item = &root.get("a").unwrap().items().unwrap()[0];
        let err = item.get("c").unwrap_err().to_string();
        assert_eq!(err, "f.json: $.a[0]: missing key `c`");
        let err = item.clone().in_dialogue("d7").get("b").unwrap().str().unwrap_err().to_string();
        assert_eq!(err, "f.json: $.a[0].b (dialogue d7): expected a string");
    }
}
