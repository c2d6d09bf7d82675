use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use udat::corpus::*;
use udat::experiments::fixtures::{domain_ablation_fixture, SHIFTED_DOMAIN};
use udat::experiments::*;
use udat::model::{ContextFeed, Tagger};
use udat::training::evaluate_with;

fn udat(args: &[&str]) -> i32 {
    udat_cli::run(std::iter::once("udat").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_json(path: &Path, value: &Value) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn small_model() -> Value {
    json!({"utterance_hidden": 8, "dialogue_hidden": 12, "embedding_dim": 12, "head_hidden": 8})
}

fn quick_train() -> Value {
    json!({"learning_rate": 0.01, "batch_size": 8, "max_epochs": 4, "patience": 2})
}

/// Synthetic train/dev/test corpora on disk.
fn synthetic_splits(dir: &Path, seed: u64) -> [PathBuf; 3] {
    let c = generate_synthetic(&SyntheticSpec::new(60, seed)).unwrap().corpus;
    let (train, dev, test) = split_by_hash(&c, seed, 0.2, 0.2);
    let paths = ["train", "dev", "test"].map(|s| dir.join(format!("{s}.jsonl")));
    for (c, path) in [train, dev, test].iter().zip(&paths) {
        save_canonical(c, path).unwrap();
    }
    paths
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(udat(&["bogus"]), 2);
    assert_eq!(udat(&["stats"]), 2);
    assert_eq!(udat(&["distribution", "--in", "x.jsonl", "--side", "sideways"]), 2);
    assert_eq!(udat(&["--jobs", "0", "fixtures"]), 2);

    let dir = tempfile::tempdir().unwrap();
    let [train, dev, _] = synthetic_splits(dir.path(), 1);
    let bad = dir.path().join("bad.json");
    write_json(&bad, &json!({"model": {"hidden_size": 3}}));
    assert_eq!(udat(&["train", "--in", p(&train), "--dev", p(&dev), "--config", p(&bad), "--out", p(&dir.path().join("m"))]), 2);
    write_json(&bad, &json!({"train": {"batch_size": 0}}));
    assert_eq!(udat(&["train", "--in", p(&train), "--dev", p(&dev), "--config", p(&bad), "--out", p(&dir.path().join("m"))]), 2);
}

#[test]
fn missing_or_malformed_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(udat(&["stats", "--in", p(&missing)]), 1);
    let broken = dir.path().join("broken.jsonl");
    fs::write(&broken, "{not json\n").unwrap();
    assert_eq!(udat(&["stats", "--in", p(&broken)]), 1);
    assert_eq!(udat(&["ingest", "--dataset", "dstc2", "--in", p(&missing), "--out", p(&dir.path().join("o.jsonl"))]), 1);
}

#[test]
fn fixture_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fx");
    assert_eq!(udat(&["fixtures", "--out", p(&out)]), 0);
    let report = read(&out.join("fixtures.json"));
    for suite in ["alignment", "heuristic"] {
        assert_eq!(report[suite]["passed"], report[suite]["total"]);
        assert!(report[suite]["total"].as_u64().unwrap() > 0);
    }
    assert!(read(&out.join("manifest.json"))["rule_digest"].is_string());
}

#[test]
fn synth_then_stats_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("syn.jsonl");
    assert_eq!(udat(&["--seed", "7", "synth", "--n", "25", "--out", p(&corpus)]), 0);
    let c = load_canonical(&corpus).unwrap();
    assert_eq!(c.dialogues.len(), 25);
    let direct = generate_synthetic(&SyntheticSpec::new(25, 7)).unwrap().corpus;
    assert_eq!(c, direct);
    let m = read(&dir.path().join("syn.manifest.json"));
    assert_eq!(m["seeds"]["synth"], 7);

    let out = dir.path().join("stats");
    assert_eq!(udat(&["stats", "--in", p(&corpus), "--out", p(&out)]), 0);
    let got: CorpusStats = serde_json::from_value(read(&out.join("stats.json"))).unwrap();
    assert_eq!(got, compute_stats(&c).unwrap());
    let m: RunManifest = serde_json::from_value(read(&out.join("manifest.json"))).unwrap();
    assert_eq!(m.inputs[p(&corpus)], sha256_file(&corpus).unwrap());

    let dist = dir.path().join("dist");
    assert_eq!(udat(&["distribution", "--in", p(&corpus), "--side", "user", "--out", p(&dist)]), 0);
    let share: std::collections::BTreeMap<String, f64> = serde_json::from_value(read(&dist.join("distribution.json"))).unwrap();
    assert_eq!(share, act_distribution(&c, Agent::User).unwrap());
}

fn dstc2_fixture(dir: &Path, system_act: &str) -> PathBuf {
    let call = dir.join("data").join("Mar13_S0A0").join("voip-1");
    write_json(
        &call.join("log.json"),
        &json!({"session-id": "voip-1", "turns": [
            {"output": {"transcript": "Hello , welcome", "dialog-acts": [{"act": system_act, "slots": []}]}},
            {"output": {"transcript": "What part of town ?", "dialog-acts": [{"act": "request", "slots": [["slot", "area"]]}]}}
        ]}),
    );
    write_json(
        &call.join("label.json"),
        &json!({"session-id": "voip-1", "turns": [
            {"transcription": "cheap food", "semantics": {"json": [{"act": "inform", "slots": [["pricerange", "cheap"]]}]}},
            {"transcription": "noise", "semantics": {"json": [{"act": "null", "slots": []}]}}
        ]}),
    );
    let flist = dir.join("dstc2_test.flist");
    fs::write(&flist, "Mar13_S0A0/voip-1\n").unwrap();
    flist
}

fn act_strings(t: &Turn) -> Vec<String> {
    t.acts.iter().map(|a| a.to_string()).collect()
}

#[test]
fn align_dstc2_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let flist = dstc2_fixture(dir.path(), "welcomemsg");
    let out = dir.path().join("aligned.jsonl");
    assert_eq!(udat(&["align", "--dataset", "dstc2", "--in", p(&flist), "--out", p(&out)]), 0);
    let c = load_canonical(&out).unwrap();
    assert_eq!(c.source, Namespace::Universal);
    assert_eq!(c.split, Split::Test);
    let t = &c.dialogues[0].turns;
    assert_eq!(act_strings(&t[0]), ["sys-hi()"]);
    assert_eq!(act_strings(&t[1]), ["inform(pricerange=cheap)"]);
    assert_eq!(act_strings(&t[2]), ["request(area)"]);
    assert!(t[3].acts.is_empty());
    assert_eq!(t[2].utterance, "What part of town ?");
    let m = read(&dir.path().join("aligned.manifest.json"));
    assert_eq!(m["audit"]["turns"], 4);
    assert_eq!(m["rule_digest"], udat::schema::RuleSet::default_v1().digest());

    let odd = tempfile::tempdir().unwrap();
    let flist = dstc2_fixture(odd.path(), "sing-a-song");
    let out = odd.path().join("aligned.jsonl");
    assert_eq!(udat(&["align", "--dataset", "dstc2", "--in", p(&flist), "--out", p(&out)]), 1);
    assert_eq!(udat(&["align", "--dataset", "dstc2", "--in", p(&flist), "--unmapped", "drop", "--out", p(&out)]), 0);
    let m = read(&odd.path().join("aligned.manifest.json"));
    assert_eq!(m["audit"]["dropped"]["dstc2:sing-a-song"], 1);
    assert!(load_canonical(&out).unwrap().dialogues[0].turns[0].acts.is_empty());
    assert_eq!(udat(&["align", "--dataset", "dstc2", "--in", p(&flist), "--disable-mod", "mod9", "--out", p(&out)]), 2);
}

#[test]
fn train_tag_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let [train, dev, test] = synthetic_splits(dir.path(), 3);
    let cfg = dir.path().join("cfg.json");
    write_json(&cfg, &json!({"model": small_model(), "train": quick_train()}));
    let model_dir = dir.path().join("model");
    assert_eq!(
        udat(&["--seed", "5", "--jobs", "1", "train", "--in", p(&train), "--dev", p(&dev), "--config", p(&cfg), "--out", p(&model_dir)]),
        0
    );
    let ckpt = model_dir.join("model.ckpt");
    let m: RunManifest = serde_json::from_value(read(&model_dir.join("manifest.json"))).unwrap();
    assert_eq!(m.checkpoints[p(&ckpt)], sha256_file(&ckpt).unwrap());
    assert_eq!(m.seeds["train"], 5);
    assert!(read(&model_dir.join("train_report.json"))["history"].as_array().unwrap().len() <= 4);

    let eval_dir = dir.path().join("eval");
    assert_eq!(udat(&["eval", "--model", p(&ckpt), "--in", p(&test), "--out", p(&eval_dir)]), 0);
    let got: udat::training::MetricsReport = serde_json::from_value(read(&eval_dir.join("metrics.json"))).unwrap();
    let tagger = Tagger::load(&ckpt).unwrap();
    let gold = load_canonical(&test).unwrap();
    assert_eq!(got, evaluate_with(&tagger, &gold, Side::System, ContextFeed::GoldIfPresent).unwrap());

    let tagged = dir.path().join("tagged.jsonl");
    assert_eq!(udat(&["tag", "--model", p(&ckpt), "--in", p(&test), "--side", "system", "--out", p(&tagged)]), 0);
    let t = load_canonical(&tagged).unwrap();
    assert_eq!(t.provenance, LabelProvenance::Estimated);
    assert_eq!(t, self_label(&tagger, &gold, Labeling::System, ContextFeed::Predicted).unwrap());
    assert_eq!(udat(&["tag", "--model", p(&ckpt), "--in", p(&test), "--side", "user", "--out", p(&tagged)]), 2);
}

#[test]
fn recorded_seed_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let [train, dev, _] = synthetic_splits(dir.path(), 4);
    let cfg = dir.path().join("cfg.json");
    write_json(&cfg, &json!({"model": small_model(), "train": quick_train()}));
    let run = |out: &Path, seed: Option<&str>| {
        let mut args = vec![];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        args.extend(["train", "--in", p(&train), "--dev", p(&dev), "--config", p(&cfg), "--out", p(out)]);
        assert_eq!(udat(&args), 0);
    };
    let first = dir.path().join("first");
    run(&first, None);
    let seed = read(&first.join("manifest.json"))["seeds"]["train"].as_u64().unwrap().to_string();
    let second = dir.path().join("second");
    run(&second, Some(&seed));
    assert_eq!(read(&first.join("train_report.json")), read(&second.join("train_report.json")));
    assert_eq!(sha256_file(&first.join("model.ckpt")).unwrap(), sha256_file(&second.join("model.ckpt")).unwrap());

    let pinned = dir.path().join("pinned.json");
    let mut tr = quick_train();
    tr["seed"] = json!(11);
    write_json(&pinned, &json!({"model": small_model(), "train": tr}));
    let third = dir.path().join("third");
    assert_eq!(udat(&["train", "--in", p(&train), "--dev", p(&dev), "--config", p(&pinned), "--out", p(&third)]), 0);
    assert_eq!(read(&third.join("manifest.json"))["seeds"]["train"], 11);
}

#[test]
fn loo_matches_the_direct_call() {
    let dir = tempfile::tempdir().unwrap();
    let data = domain_ablation_fixture(2, 300);
    for (name, c) in [("train", &data.train), ("dev", &data.dev), ("test", &data.test)] {
        save_canonical(c, &dir.path().join(format!("{name}.jsonl"))).unwrap();
    }
    let loo = json!({
        "held_out_domain": SHIFTED_DOMAIN,
        "ood_turn_budget": 150,
        "in_domain_turn_budget": 30,
        "in_domain_label_source": "gold",
        "model": small_model(),
        "train": quick_train(),
        "seed": 3
    });
    let cfg = dir.path().join("loo.json");
    write_json(&cfg, &json!({"train": "train.jsonl", "dev": "dev.jsonl", "test": "test.jsonl", "loo": loo}));
    let out = dir.path().join("out");
    assert_eq!(udat(&["experiment", "loo", "--config", p(&cfg), "--out", p(&out)]), 0);

    let direct_cfg: LooConfig = serde_json::from_value(loo).unwrap();
    let reloaded = udat::training::DatasetSplits {
        train: load_canonical(&dir.path().join("train.jsonl")).unwrap(),
        dev: load_canonical(&dir.path().join("dev.jsonl")).unwrap(),
        test: load_canonical(&dir.path().join("test.jsonl")).unwrap(),
    };
    let direct = leave_one_domain_out(&reloaded, None, &direct_cfg).unwrap();
    let got = read(&out.join("loo.json"));
    assert_eq!(got["report"], serde_json::to_value(&direct.report).unwrap());
    assert_eq!(got["audit"], serde_json::to_value(&direct.audit).unwrap());
    assert_eq!(read(&out.join("manifest.json"))["seeds"]["sample"], 3);

    let greedy = dir.path().join("greedy.json");
    let mut over = read(&cfg);
    over["loo"]["in_domain_turn_budget"] = json!(1_000_000);
    write_json(&greedy, &over);
    assert_eq!(udat(&["experiment", "loo", "--config", p(&greedy)]), 1);
}

#[test]
fn curve_and_matrix_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let [train, dev, test] = synthetic_splits(dir.path(), 6);
    let pool = load_canonical(&train).unwrap().count_side(Side::System);
    let cfg = dir.path().join("curve.json");
    write_json(
        &cfg,
        &json!({"pool": "train.jsonl", "dev": "dev.jsonl", "test": "test.jsonl", "sizes": [pool / 4, pool], "model": small_model(), "train": quick_train()}),
    );
    let out = dir.path().join("curve");
    assert_eq!(udat(&["--seed", "1", "experiment", "curve", "--config", p(&cfg), "--out", p(&out)]), 0);
    let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(read(&out.join("curve.json"))["points"].as_array().unwrap().len(), 2);

    let cfg = dir.path().join("matrix.json");
    let entry = json!({"name": "S", "train": p(&train), "dev": p(&dev), "test": p(&test)});
    write_json(&cfg, &json!({"datasets": [entry], "model": small_model(), "train": quick_train()}));
    let out = dir.path().join("matrix");
    assert_eq!(udat(&["--seed", "1", "experiment", "matrix", "--config", p(&cfg), "--out", p(&out)]), 0);
    assert_eq!(read(&out.join("matrix.json"))["cells"].as_array().unwrap().len(), 1);
}

#[test]
fn selftrain_writes_student_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let [train, dev, test] = synthetic_splits(dir.path(), 8);
    let teacher_cfg = dir.path().join("cfg.json");
    write_json(&teacher_cfg, &json!({"model": small_model(), "train": quick_train()}));
    let teacher = dir.path().join("teacher");
    assert_eq!(udat(&["--seed", "2", "train", "--in", p(&train), "--dev", p(&dev), "--config", p(&teacher_cfg), "--out", p(&teacher)]), 0);

    let cfg = dir.path().join("st.json");
    let st = json!({"student_model": small_model(), "student_train": quick_train()});
    write_json(&cfg, &json!({"teacher": "teacher/model.ckpt", "unlabeled": "dev.jsonl", "test": "test.jsonl", "selftrain": st}));
    let out = dir.path().join("st");
    assert_eq!(udat(&["--seed", "2", "experiment", "selftrain", "--config", p(&cfg), "--out", p(&out)]), 0);
    let labeled = load_canonical(&out.join("self_labeled.jsonl")).unwrap();
    assert_eq!(labeled.provenance, LabelProvenance::Estimated);
    let report = read(&out.join("selftrain.json"));
    let tagger = Tagger::load(&teacher.join("model.ckpt")).unwrap();
    let direct = udat::training::evaluate(&tagger, &load_canonical(&test).unwrap(), Side::System).unwrap();
    assert_eq!(report["teacher"], serde_json::to_value(&direct).unwrap());
    assert!(out.join("student.ckpt").is_file());
    assert_eq!(udat(&["experiment", "selftrain", "--config", p(&cfg)]), 2);
}
