use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::corpus::Corpus;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token → row index of the embedding matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Reserved tokens followed by `tokens` in order, skipping repeats.
    pub fn new(tokens: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut seen: std::collections::HashSet<String> = all.iter().cloned().collect();
        for t in tokens {
            let t = t.into();
            if seen.insert(t.clone()) {
                all.push(t);
            }
        }
        Vocabulary::from(all)
    }

    /// Tokens seen at least `min_count` times, most frequent first, ties
    /// broken lexicographically.
    pub fn from_corpora(corpora: &[&Corpus], min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for c in corpora {
            for t in c.dialogues.iter().flat_map(|d| &d.turns) {
                for tok in &t.tokens {
                    *counts.entry(tok.as_str()).or_default() += 1;
                }
            }
        }
        let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|(_, n)| *n >= min_count.max(1)).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Vocabulary::new(kept.into_iter().map(|(t, _)| t.to_string()))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Indices for a token sequence; unknown tokens map to [`UNK`] and an
    /// empty sequence becomes a single [`PAD`].
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        if tokens.is_empty() {
            return vec![PAD];
        }
        tokens.iter().map(|t| self.get(t).unwrap_or(UNK)).collect()
    }
}

/// Embedding matrix for `vocab` with every row drawn from uniform(-0.1, 0.1).
pub fn random_embeddings<R: Rng>(vocab: &Vocabulary, dim: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((vocab.len(), dim), |_| rng.gen_range(-0.1..0.1))
}

/// Reads a plain-text vector file (`count dim` header, then a token and
/// `dim` floats per line). Rows of tokens found in the file are overwritten;
/// the others keep their random initialization. Returns the number of
/// vocabulary tokens found.
pub fn load_pretrained(path: &Path, vocab: &Vocabulary, embeddings: &mut Array2<f64>) -> Result<usize> {
    let io = |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bad = |line: usize, message: String| ModelError::Embeddings {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(File::open(path).map_err(io)?).lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?.map_err(io)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dim: usize = match fields.as_slice() {
        [_, d] => d.parse().map_err(|_| bad(1, format!("bad header `{header}`")))?,
        _ => return Err(bad(1, format!("expected `count dim` header, found `{header}`"))),
    };
    if dim != embeddings.ncols() {
        return Err(bad(1, format!("vectors have dimension {dim}, model expects {}", embeddings.ncols())));
    }
    let mut found = 0;
    for (n, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let Some(token) = parts.next() else { continue };
        let Some(row) = vocab.get(token) else { continue };
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(n + 2, e.to_string()))?;
        if values.len() != dim {
            return Err(bad(n + 2, format!("{} values for dimension {dim}", values.len())));
        }
        for (k, v) in values.into_iter().enumerate() {
            embeddings[[row, k]] = v;
        }
        found += 1;
    }
    Ok(found)
}
