use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{json, Value};
use udat::corpus::{
    act_distribution, compute_stats, generate_synthetic, load_native_split, save_canonical, ActGrammar, Agent, Corpus,
    Labeling, Side, SyntheticSpec,
};
use udat::experiments::data::native_path;
use udat::experiments::self_label;
use udat::model::{ModelConfig, Tagger};
use udat::schema::fixtures::{alignment_fixtures, heuristic_fixtures, run_fixtures};
use udat::schema::{align_corpus_with, Mod, RuleSet, UnmappedPolicy};
use udat::training::{evaluate_with, train_pooled, TrainConfig};

use super::*;

pub(crate) fn load_rules(path: Option<&Path>) -> CliResult<RuleSet> {
    Ok(match path {
        Some(p) => RuleSet::load(p)?,
        None => RuleSet::default_v1(),
    })
}

pub(crate) fn record_rules(run: &mut Run, rules: &RuleSet) {
    run.manifest.rule_version = Some(rules.version().to_string());
    run.manifest.rule_digest = Some(rules.digest().to_string());
}

/// Directory outputs keep their manifest inside the directory.
pub(crate) fn dir_manifest(out: Option<&Path>) -> CliResult<Option<PathBuf>> {
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            Ok(Some(dir.join("manifest.json")))
        }
        None => Ok(None),
    }
}

fn save_corpus(run: &mut Run, corpus: &Corpus, out: &Path) -> CliResult<Option<PathBuf>> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    save_canonical(corpus, out)?;
    run.output(out);
    Ok(Some(sidecar(out)))
}

fn native_input(input: Option<&Path>, data_dir: Option<&Path>, dataset: udat::corpus::Namespace, split: Option<Split>) -> CliResult<PathBuf> {
    match (input, data_dir) {
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(root)) => Ok(native_path(root, dataset, split.unwrap_or(Split::Train))),
        (None, None) => Err(usage("--in is required when UDAT_DATA_DIR is not set")),
    }
}

pub(crate) fn ingest(run: &mut Run, a: IngestArgs) -> CliResult<Option<PathBuf>> {
    let path = native_input(a.input.as_deref(), a.data_dir.as_deref(), a.dataset, a.split)?;
    run.set_config(&json!({"dataset": a.dataset.as_str(), "split": a.split}));
    let corpus = load_native_split(a.dataset, &path, a.split)?;
    run.input(&path)?;
    save_corpus(run, &corpus, &a.out)
}

pub(crate) fn align(run: &mut Run, a: AlignArgs) -> CliResult<Option<PathBuf>> {
    let mut rules = load_rules(a.rules.as_deref())?;
    if !a.disable_mod.is_empty() {
        let mut mods = rules.mods();
        for m in &a.disable_mod {
            mods = mods.with(m.parse::<Mod>().map_err(|e| usage(e.to_string()))?, false);
        }
        rules = rules.with_mods(mods);
    }
    let policy = match a.unmapped {
        Unmapped::Error => UnmappedPolicy::Error,
        Unmapped::Drop => UnmappedPolicy::Drop,
    };
    let corpus = match a.dataset {
        Some(ns) => {
            let path = native_input(a.input.as_deref(), a.data_dir.as_deref(), ns, a.split)?;
            let c = load_native_split(ns, &path, a.split)?;
            run.input(&path)?;
            c
        }
        None => {
            let path = a.input.as_deref().ok_or_else(|| usage("--in is required without --dataset"))?;
            run.corpus(path)?
        }
    };
    run.set_config(&json!({
        "dataset": a.dataset.map(|d| d.as_str()),
        "mods": rules.mods(),
        "unmapped": policy,
    }));
    let (aligned, report) = align_corpus_with(&corpus, &rules, policy)?;
    record_rules(run, &rules);
    run.manifest.audit = Some(serde_json::to_value(&report).expect("report serializes"));
    save_corpus(run, &aligned, &a.out)
}

pub(crate) fn stats(run: &mut Run, a: StatsArgs) -> CliResult<Option<PathBuf>> {
    let corpus = run.corpus(&a.input)?;
    let manifest = dir_manifest(a.out.as_deref())?;
    run.report(a.out.as_deref(), "stats.json", &compute_stats(&corpus)?)?;
    Ok(manifest)
}

pub(crate) fn distribution(run: &mut Run, a: DistributionArgs) -> CliResult<Option<PathBuf>> {
    let agent = match a.side {
        Side::System => Agent::System,
        Side::User => Agent::User,
        Side::Both => return Err(usage("--side must be system or user")),
    };
    let corpus = run.corpus(&a.input)?;
    run.set_config(&json!({"side": a.side}));
    let manifest = dir_manifest(a.out.as_deref())?;
    run.report(a.out.as_deref(), "distribution.json", &act_distribution(&corpus, agent)?)?;
    Ok(manifest)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    #[serde(default)]
    model: ModelConfig,
    #[serde(default)]
    train: TrainConfig,
}

pub(crate) fn train(run: &mut Run, a: TrainArgs) -> CliResult<Option<PathBuf>> {
    let raw = match &a.config {
        Some(p) => read_json(p)?,
        None => json!({}),
    };
    let mut cfg: TrainFile = match &a.config {
        Some(p) => from_value(raw.clone(), p)?,
        None => TrainFile::default(),
    };
    if let Some(s) = run.seed_for(&raw, &["/model/seed", "/train/seed"]) {
        cfg.model.seed = s;
        cfg.train.seed = s;
    }
    if let Some(t) = a.threshold {
        cfg.model.decision_threshold = t;
    }
    if let Some(side) = a.side {
        cfg.train.eval_side = side;
    }
    run.record_seed("model", cfg.model.seed);
    run.record_seed("train", cfg.train.seed);
    run.set_config(&json!({"model": cfg.model, "train": cfg.train}));
    if let Some(p) = &a.config {
        run.input(p)?;
    }

    let trains = a.input.iter().map(|p| run.corpus(p)).collect::<CliResult<Vec<_>>>()?;
    let devs = a.dev.iter().map(|p| run.corpus(p)).collect::<CliResult<Vec<_>>>()?;
    let outcome = train_pooled(&cfg.model, &cfg.train, &trains.iter().collect::<Vec<_>>(), &devs.iter().collect::<Vec<_>>())?;

    ensure_dir(&a.out)?;
    let ckpt = a.out.join("model.ckpt");
    outcome.tagger.save(&ckpt)?;
    run.output(&ckpt);
    run.manifest.add_checkpoint(&ckpt).map_err(data)?;
    let history: Vec<Value> = outcome
        .history
        .iter()
        .map(|r| json!({"epoch": r.epoch, "train_loss": r.train_loss, "dev_micro_f1": r.dev_micro_f1}))
        .collect();
    let report = json!({
        "best_epoch": outcome.best_epoch,
        "best_dev_f1": outcome.best_dev_f1,
        "initial_loss": outcome.initial_loss,
        "labels": outcome.tagger.labels.names(),
        "vocab_size": outcome.tagger.vocab.len(),
        "history": history,
    });
    run.report(Some(&a.out), "train_report.json", &report)?;
    Ok(Some(a.out.join("manifest.json")))
}

pub(crate) fn load_tagger(run: &mut Run, path: &Path, threshold: Option<f64>) -> CliResult<Tagger> {
    let mut t = Tagger::load(path)?;
    run.manifest.add_checkpoint(path).map_err(data)?;
    if let Some(th) = threshold {
        if !(0.0..=1.0).contains(&th) {
            return Err(usage(format!("--threshold {th} must lie in [0, 1]")));
        }
        t.config.decision_threshold = th;
    }
    Ok(t)
}

pub(crate) fn tag(run: &mut Run, a: TagArgs) -> CliResult<Option<PathBuf>> {
    let target = match a.side {
        Side::System => Labeling::System,
        Side::Both => Labeling::Both,
        Side::User => return Err(usage("--side must be system or both")),
    };
    let tagger = load_tagger(run, &a.model, a.threshold)?;
    let corpus = run.corpus(&a.input)?;
    run.set_config(&json!({"side": a.side, "feed": format!("{:?}", a.feed).to_lowercase(), "threshold": tagger.config.decision_threshold}));
    let out = self_label(&tagger, &corpus, target, a.feed.into())?;
    save_corpus(run, &out, &a.out)
}

pub(crate) fn eval(run: &mut Run, a: EvalArgs) -> CliResult<Option<PathBuf>> {
    let tagger = load_tagger(run, &a.model, a.threshold)?;
    let corpus = run.corpus(&a.input)?;
    run.set_config(&json!({"side": a.side, "feed": format!("{:?}", a.feed).to_lowercase(), "threshold": tagger.config.decision_threshold}));
    let report = evaluate_with(&tagger, &corpus, a.side, a.feed.into())?;
    let manifest = dir_manifest(a.out.as_deref())?;
    run.report(a.out.as_deref(), "metrics.json", &report)?;
    Ok(manifest)
}

pub(crate) fn fixtures(run: &mut Run, a: FixturesArgs) -> CliResult<Option<PathBuf>> {
    let rules = load_rules(a.rules.as_deref())?;
    if let Some(p) = &a.rules {
        run.input(p)?;
    }
    record_rules(run, &rules);
    let alignment = run_fixtures(&alignment_fixtures(), &rules);
    let heuristic = run_fixtures(&heuristic_fixtures(), &rules);
    let manifest = dir_manifest(a.out.as_deref())?;
    run.report(a.out.as_deref(), "fixtures.json", &json!({"alignment": alignment, "heuristic": heuristic}))?;
    let failed: Vec<&str> = alignment.failures().chain(heuristic.failures()).map(|o| o.row.as_str()).collect();
    eprintln!(
        "alignment {}/{}, heuristic {}/{}",
        alignment.passed, alignment.total, heuristic.passed, heuristic.total
    );
    if !failed.is_empty() {
        if let Some(m) = &manifest {
            run.manifest.write_atomic(m).map_err(data)?;
        }
        return Err(CliError::Data(format!("{} fixtures failed: {}", failed.len(), failed.join(", "))));
    }
    Ok(manifest)
}

pub(crate) fn synth(run: &mut Run, a: SynthArgs) -> CliResult<Option<PathBuf>> {
    if !(0.0..=1.0).contains(&a.noise) {
        return Err(usage(format!("--noise {} must lie in [0, 1]", a.noise)));
    }
    let grammar: ActGrammar = match &a.grammar {
        Some(p) => {
            let g = from_value(read_json(p)?, p)?;
            run.input(p)?;
            g
        }
        None => ActGrammar::task_oriented(),
    };
    let seed = run.seed_for(&Value::Null, &[]).expect("no config seeds to keep");
    run.record_seed("synth", seed);
    let spec = SyntheticSpec {
        noise_rate: a.noise,
        grammar,
        ..SyntheticSpec::new(a.n, seed)
    };
    run.set_config(&json!({"n_dialogues": a.n, "noise_rate": a.noise, "seed": seed}));
    let corpus = generate_synthetic(&spec)?.corpus;
    save_corpus(run, &corpus, &a.out)
}
