//! Experiment configs name canonical corpora by path; relative paths are
//! resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{json, Value};
use udat::corpus::{save_canonical, Side};
use udat::experiments::{domain_ablation, leave_one_domain_out, semi_supervised_run, LooConfig, SelfTrainConfig};
use udat::model::ModelConfig;
use udat::training::{learning_curve, transfer_matrix, DatasetSplits, TrainConfig};

use super::commands::{dir_manifest, load_tagger};
use super::*;

struct Config {
    raw: Value,
    base: PathBuf,
    origin: PathBuf,
}

impl Config {
    fn read(run: &mut Run, path: &Path) -> CliResult<Config> {
        let raw = read_json(path)?;
        run.input(path)?;
        Ok(Config {
            raw,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            origin: path.to_path_buf(),
        })
    }

    fn parse<T: serde::de::DeserializeOwned>(&self) -> CliResult<T> {
        from_value(self.raw.clone(), &self.origin)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

fn load_splits(run: &mut Run, cfg: &Config, [train, dev, test]: [&PathBuf; 3]) -> CliResult<DatasetSplits> {
    Ok(DatasetSplits {
        train: run.corpus(&cfg.resolve(train))?,
        dev: run.corpus(&cfg.resolve(dev))?,
        test: run.corpus(&cfg.resolve(test))?,
    })
}

fn apply_seed(run: &mut Run, cfg: &Config, pointers: &[&str], model: &mut ModelConfig, train: &mut TrainConfig) {
    if let Some(s) = run.seed_for(&cfg.raw, pointers) {
        model.seed = s;
        train.seed = s;
    }
    run.record_seed("model", model.seed);
    run.record_seed("train", train.seed);
}

fn apply_threshold(model: &mut ModelConfig, threshold: Option<f64>) {
    if let Some(t) = threshold {
        model.decision_threshold = t;
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedSplits {
    name: String,
    train: PathBuf,
    dev: PathBuf,
    test: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    datasets: Vec<NamedSplits>,
    #[serde(default)]
    model: ModelConfig,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default = "side_both")]
    side: Side,
}

fn side_both() -> Side {
    Side::Both
}

fn side_system() -> Side {
    Side::System
}

pub(crate) fn matrix(run: &mut Run, a: ExperimentArgs) -> CliResult<Option<PathBuf>> {
    let cfg = Config::read(run, &a.config)?;
    let mut m: MatrixFile = cfg.parse()?;
    if m.datasets.is_empty() {
        return Err(usage("matrix config lists no datasets"));
    }
    apply_seed(run, &cfg, &["/model/seed", "/train/seed"], &mut m.model, &mut m.train);
    apply_threshold(&mut m.model, a.threshold);
    let side = a.side.unwrap_or(m.side);
    run.set_config(&json!({"datasets": m.datasets.iter().map(|d| &d.name).collect::<Vec<_>>(), "model": m.model, "train": m.train, "side": side}));
    let mut data = Vec::new();
    for d in &m.datasets {
        data.push((d.name.clone(), load_splits(run, &cfg, [&d.train, &d.dev, &d.test])?));
    }
    let result = transfer_matrix(&data, &m.model, &m.train, side)?;
    let manifest = dir_manifest(a.out.as_deref())?;
    run.report(a.out.as_deref(), "matrix.json", &result)?;
    Ok(manifest)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    pool: PathBuf,
    dev: PathBuf,
    test: PathBuf,
    sizes: Vec<usize>,
    #[serde(default)]
    model: ModelConfig,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default = "side_system")]
    side: Side,
    #[serde(default)]
    references: BTreeMap<String, f64>,
}

pub(crate) fn curve(run: &mut Run, a: ExperimentArgs) -> CliResult<Option<PathBuf>> {
    let cfg = Config::read(run, &a.config)?;
    let mut c: CurveFile = cfg.parse()?;
    apply_seed(run, &cfg, &["/model/seed", "/train/seed"], &mut c.model, &mut c.train);
    apply_threshold(&mut c.model, a.threshold);
    let side = a.side.unwrap_or(c.side);
    run.set_config(&json!({"sizes": c.sizes, "model": c.model, "train": c.train, "side": side, "references": c.references}));
    let pool = run.corpus(&cfg.resolve(&c.pool))?;
    let dev = run.corpus(&cfg.resolve(&c.dev))?;
    let test = run.corpus(&cfg.resolve(&c.test))?;
    let result = learning_curve(&pool, &c.sizes, &c.model, &c.train, &dev, &test, side, c.references.clone())?;
    let manifest = dir_manifest(a.out.as_deref())?;
    run.report(a.out.as_deref(), "curve.json", &result)?;
    if let Some(dir) = a.out.as_deref() {
        let csv = dir.join("curve.csv");
        write_file(&csv, result.to_csv().as_bytes())?;
        run.output(&csv);
    }
    Ok(manifest)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelfTrainFile {
    teacher: PathBuf,
    unlabeled: PathBuf,
    test: PathBuf,
    #[serde(default)]
    selftrain: SelfTrainConfig,
}

pub(crate) fn selftrain(run: &mut Run, a: ExperimentArgs) -> CliResult<Option<PathBuf>> {
    let out = a.out.clone().ok_or_else(|| usage("experiment selftrain needs --out"))?;
    let cfg = Config::read(run, &a.config)?;
    let mut s: SelfTrainFile = cfg.parse()?;
    let st = &mut s.selftrain;
    apply_seed(
        run,
        &cfg,
        &["/selftrain/student_model/seed", "/selftrain/student_train/seed"],
        &mut st.student_model,
        &mut st.student_train,
    );
    apply_threshold(&mut st.student_model, a.threshold);
    if let Some(side) = a.side {
        st.eval_side = side;
    }
    run.set_config(&json!({"selftrain": st}));
    let teacher = load_tagger(run, &cfg.resolve(&s.teacher), a.threshold)?;
    let unlabeled = run.corpus(&cfg.resolve(&s.unlabeled))?;
    let test = run.corpus(&cfg.resolve(&s.test))?;
    let outcome = semi_supervised_run(&s.selftrain, &teacher, &unlabeled, &test)?;

    ensure_dir(&out)?;
    let ckpt = out.join("student.ckpt");
    outcome.student.save(&ckpt)?;
    run.output(&ckpt);
    run.manifest.add_checkpoint(&ckpt).map_err(data)?;
    let labeled = out.join("self_labeled.jsonl");
    save_canonical(&outcome.self_labeled, &labeled)?;
    run.output(&labeled);
    let report = json!({"teacher": outcome.teacher_report, "student": outcome.student_report});
    run.report(Some(&out), "selftrain.json", &report)?;
    Ok(Some(out.join("manifest.json")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LooFile {
    train: PathBuf,
    dev: PathBuf,
    test: PathBuf,
    #[serde(default)]
    teacher: Option<PathBuf>,
    /// Runs the full domain table instead of a single held-out domain.
    #[serde(default)]
    domains: Option<Vec<String>>,
    loo: LooConfig,
}

pub(crate) fn loo(run: &mut Run, a: ExperimentArgs) -> CliResult<Option<PathBuf>> {
    if a.side.is_some_and(|s| s != Side::System) {
        return Err(usage("leave-one-domain-out runs score system turns only"));
    }
    let cfg = Config::read(run, &a.config)?;
    let mut l: LooFile = cfg.parse()?;
    if let Some(s) = run.seed_for(&cfg.raw, &["/loo/seed", "/loo/model/seed", "/loo/train/seed"]) {
        l.loo.seed = s;
        l.loo.model.seed = s;
        l.loo.train.seed = s;
    }
    run.record_seed("sample", l.loo.seed);
    run.record_seed("model", l.loo.model.seed);
    run.record_seed("train", l.loo.train.seed);
    apply_threshold(&mut l.loo.model, a.threshold);
    run.set_config(&json!({"loo": l.loo, "domains": l.domains}));
    let splits = load_splits(run, &cfg, [&l.train, &l.dev, &l.test])?;
    let teacher = match &l.teacher {
        Some(p) => Some(load_tagger(run, &cfg.resolve(p), None)?),
        None => None,
    };
    let manifest = dir_manifest(a.out.as_deref())?;
    match &l.domains {
        Some(domains) => {
            let table = domain_ablation(&splits, teacher.as_ref(), domains, &l.loo)?;
            run.report(a.out.as_deref(), "domain_table.json", &table)?;
        }
        None => {
            let o = leave_one_domain_out(&splits, teacher.as_ref(), &l.loo)?;
            run.manifest.audit = Some(serde_json::to_value(&o.audit).expect("audit serializes"));
            let report = json!({"domain": o.domain, "label_source": o.label_source, "report": o.report, "audit": o.audit});
            run.report(a.out.as_deref(), "loo.json", &report)?;
            if let Some(dir) = a.out.as_deref() {
                let ckpt = dir.join("student.ckpt");
                o.student.save(&ckpt)?;
                run.output(&ckpt);
                run.manifest.add_checkpoint(&ckpt).map_err(data)?;
            }
        }
    }
    Ok(manifest)
}
