//! Layout of a local dataset root:
//!
//! ```text
//! <root>/sim-R/{train,dev,test}.json
//! <root>/sim-M/{train,dev,test}.json
//! <root>/dstc2/dstc2_{train,dev,test}.flist   (call directories under <root>/dstc2/data)
//! <root>/multiwoz/{data.json,dialogue_acts.json,valListFile.json,testListFile.json}
//! ```

use std::path::{Path, PathBuf};

use crate::corpus::{load_native_split, Corpus, Namespace, Split};
use crate::schema::{align_corpus, RuleSet};
use crate::training::DatasetSplits;

use super::Result;

/// Environment variable naming the default dataset root.
pub const DATA_DIR_ENV: &str = "UDAT_DATA_DIR";

/// The dataset root from [`DATA_DIR_ENV`], when it names a directory.
pub fn data_root() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os(DATA_DIR_ENV)?);
    dir.is_dir().then_some(dir)
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Dev => "dev",
        Split::Test => "test",
    }
}

pub fn native_path(root: &Path, dataset: Namespace, split: Split) -> PathBuf {
    let s = split_name(split);
    match dataset {
        Namespace::GsimR => root.join("sim-R").join(format!("{s}.json")),
        Namespace::GsimM => root.join("sim-M").join(format!("{s}.json")),
        Namespace::Dstc2 => root.join("dstc2").join(format!("dstc2_{s}.flist")),
        Namespace::Multiwoz | Namespace::Universal => root.join("multiwoz"),
    }
}

/// Whether every split of `dataset` is present below `root`.
pub fn is_available(root: &Path, dataset: Namespace) -> bool {
    [Split::Train, Split::Dev, Split::Test]
        .iter()
        .all(|&s| native_path(root, dataset, s).exists())
        && (dataset != Namespace::Multiwoz || root.join("multiwoz").join("data.json").is_file())
}

pub fn load_split(root: &Path, dataset: Namespace, split: Split) -> Result<Corpus> {
    Ok(load_native_split(dataset, &native_path(root, dataset, split), Some(split))?)
}

/// All three splits in their native labeling.
pub fn load_splits(root: &Path, dataset: Namespace) -> Result<DatasetSplits> {
    Ok(DatasetSplits {
        train: load_split(root, dataset, Split::Train)?,
        dev: load_split(root, dataset, Split::Dev)?,
        test: load_split(root, dataset, Split::Test)?,
    })
}

/// All three splits aligned to the universal schema.
pub fn load_aligned(root: &Path, dataset: Namespace, rules: &RuleSet) -> Result<DatasetSplits> {
    let s = load_splits(root, dataset)?;
    Ok(DatasetSplits {
        train: align_corpus(&s.train, rules)?,
        dev: align_corpus(&s.dev, rules)?,
        test: align_corpus(&s.test, rules)?,
    })
}
