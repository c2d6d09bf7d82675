//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the
//! real-data criterion runs only when `UDAT_DATA_DIR` names a dataset root.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udat::corpus::*;
use udat::experiments::data::{data_root, is_available, load_aligned, load_splits};
use udat::experiments::fixtures::*;
use udat::experiments::*;
use udat::model::*;
use udat::schema::fixtures::{alignment_fixtures, documented_inventory, heuristic_fixtures, run_fixtures};
use udat::schema::{align_act, align_corpus, validate_universal, LabelSpace, RuleSet, SchemaError};
use udat::training::*;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.3}s", d.as_secs_f64())
}

fn alignment_fixture_suite() -> Outcome {
    let start = Instant::now();
    let rules = RuleSet::default_v1();
    let report = run_fixtures(&alignment_fixtures(), &rules);
    let inventory = documented_inventory();
    let unmapped = inventory
        .iter()
        .filter(|(_, agent, act)| matches!(align_act(act, *agent, &rules), Err(SchemaError::UnmappedAct { .. })))
        .count();
    let took = start.elapsed();
    let failed: Vec<&str> = report.failures().map(|f| f.row.as_str()).collect();
    verdict(
        report.all_passed() && unmapped == 0 && took < Duration::from_secs(1),
        format!(
            "{}/{} rows exact, {unmapped} unmapped of {} inventory acts, {}{}",
            report.passed,
            report.total,
            inventory.len(),
            secs(took),
            if failed.is_empty() { String::new() } else { format!(", failing: {failed:?}") }
        ),
    )
}

fn heuristic_fixture_suite() -> Outcome {
    let start = Instant::now();
    let fixtures = heuristic_fixtures();
    let report = run_fixtures(&fixtures, &RuleSet::default_v1());
    let took = start.elapsed();
    let has = |needle: &str| fixtures.iter().any(|f| f.row.contains(needle));
    let conditions = has("'*bye'") && has("ends in Booking-Inform(none=none)");
    let failed: Vec<&str> = report.failures().map(|f| f.row.as_str()).collect();
    verdict(
        report.all_passed() && conditions && took < Duration::from_secs(1),
        format!(
            "{}/{} rows exact, keyword and sequence conditions present: {conditions}, {}{}",
            report.passed,
            report.total,
            secs(took),
            if failed.is_empty() { String::new() } else { format!(", failing: {failed:?}") }
        ),
    )
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        utterance_hidden: 4,
        dialogue_hidden: 6,
        embedding_dim: 5,
        n_acts: 3,
        past_act_window: 2,
        head_hidden: 3,
        seed: 11,
        ..ModelConfig::default()
    }
}

fn gradient_check_suite() -> Outcome {
    let start = Instant::now();
    let d = Dialogue::new(
        "g",
        vec![
            Turn::new(Agent::User, "i want cheap thai food", vec![DialogueAct::universal("inform")]),
            Turn::new(
                Agent::System,
                "what area , and is that right",
                vec![DialogueAct::universal("request"), DialogueAct::universal("affirm")],
            ),
        ],
    );
    let c = Corpus::new(Namespace::Universal, Split::Train, Labeling::Both, vec![d.clone()]);
    let labels = LabelSpace::new(["inform", "request", "affirm"]);
    let tagger = Tagger::new(tiny_model(), labels, Vocabulary::from_corpora(&[&c], 1)).unwrap();
    let encoded = tagger.encode_dialogue(&d, Labeling::Both).unwrap();
    let report = gradient_check(&tagger, &[encoded], 1e-4).unwrap();
    let took = start.elapsed();
    verdict(
        report.max_rel_err < 1e-4 && report.checked > 100 && took < Duration::from_secs(30),
        format!(
            "M = 3, dims <= 8, 2 turns: max relative error {:.2e} ({}) over {} entries ({} below the round-off floor and {} at ReLU kinks skipped), {}",
            report.max_rel_err,
            report.worst_tensor,
            report.checked,
            report.skipped,
            report.kinked,
            secs(took)
        ),
    )
}

fn loss_constant_suite() -> Outcome {
    let c = generate_synthetic(&SyntheticSpec::new(6, 2)).unwrap().corpus;
    let mut worst: f64 = 0.0;
    let mut cases = Vec::new();
    for labels in [LabelSpace::universal(), LabelSpace::new(["inform", "request", "affirm"])] {
        let m = labels.len();
        let config = ModelConfig {
            utterance_hidden: 6,
            dialogue_hidden: 6,
            embedding_dim: 6,
            n_acts: m,
            head_hidden: 4,
            ..ModelConfig::default()
        };
        let mut t = Tagger::new(config, labels, Vocabulary::from_corpora(&[&c], 1)).unwrap();
        t.params.w2.fill(0.0);
        t.params.b2.fill(0.0);
        let restricted = Corpus {
            dialogues: c
                .dialogues
                .iter()
                .map(|d| {
                    let mut d = d.clone();
                    for turn in &mut d.turns {
                        let keep: Vec<DialogueAct> = turn.acts.iter().filter(|a| t.labels.contains(&a.name)).cloned().collect();
                        turn.set_acts(keep);
                    }
                    d
                })
                .collect(),
            ..c.clone()
        };
        let encoded: Vec<EncodedDialogue> =
            restricted.dialogues.iter().map(|d| t.encode_dialogue(d, restricted.labeled).unwrap()).collect();
        let n: usize = encoded.iter().map(|e| e.n_labeled()).sum();
        let loss = t.batch_loss(&encoded).unwrap();
        let expected = (m * n) as f64 * std::f64::consts::LN_2;
        worst = worst.max((loss - expected).abs());
        cases.push(format!("M={m} N={n} loss {loss:.9} vs {expected:.9}"));
    }
    verdict(worst <= 1e-9, format!("{}; max deviation {worst:.1e}", cases.join("; ")))
}

/// Counts confusions by scanning a dense turn × act membership table.
fn brute_force(preds: &[BTreeSet<String>], golds: &[BTreeSet<String>]) -> (BTreeMap<String, [usize; 3]>, f64) {
    let mut acts: Vec<&String> = preds.iter().chain(golds).flatten().collect();
    acts.sort();
    acts.dedup();
    let mut per = BTreeMap::new();
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for a in &acts {
        let mut c = [0usize; 3];
        for i in 0..golds.len() {
            let p = preds[i].iter().any(|x| x == *a);
            let g = golds[i].iter().any(|x| x == *a);
            if p && g {
                c[0] += 1;
            }
            if p && !g {
                c[1] += 1;
            }
            if !p && g {
                c[2] += 1;
            }
        }
        tp += c[0];
        fp += c[1];
        fn_ += c[2];
        per.insert((*a).clone(), c);
    }
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (per, f)
}

fn f1_oracle_suite() -> Outcome {
    let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<BTreeSet<String>>();
    let hand = f1_score(&[set(&["inform"])], &[set(&["inform", "request"])]).unwrap();
    let hand_ok = hand.micro_precision == 1.0 && hand.micro_recall == 0.5 && (hand.micro_f1 - 2.0 / 3.0).abs() < 1e-15;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let names = &udat::schema::UNIVERSAL_ACTS[..8];
    let mut mismatches = 0;
    let mut count_formula: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..12);
        let draw = |rng: &mut ChaCha8Rng| {
            names.iter().filter(|_| rng.gen_bool(0.25)).map(|s| s.to_string()).collect::<BTreeSet<String>>()
        };
        let preds: Vec<_> = (0..n).map(|_| draw(&mut rng)).collect();
        let golds: Vec<_> = (0..n).map(|_| draw(&mut rng)).collect();
        let r = f1_score(&preds, &golds).unwrap();
        let (per, f) = brute_force(&preds, &golds);
        let counts: BTreeMap<String, [usize; 3]> = r.per_act.iter().map(|(k, m)| (k.clone(), [m.tp, m.fp, m.fn_])).collect();
        if r.micro_f1 != f || counts != per {
            mismatches += 1;
        }
        let (tp, fp, fn_) = per.values().fold((0, 0, 0), |a, c| (a.0 + c[0], a.1 + c[1], a.2 + c[2]));
        if tp + fp + fn_ > 0 {
            count_formula = count_formula.max((r.micro_f1 - 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64).abs());
        }
    }
    verdict(
        hand_ok && mismatches == 0 && count_formula < 1e-12,
        format!(
            "hand case micro-F1 {:.6} (P {}, R {}); {mismatches} of 1000 random cases differ from the counting oracle",
            hand.micro_f1, hand.micro_precision, hand.micro_recall
        ),
    )
}

fn overfit_suite() -> Outcome {
    let start = Instant::now();
    let c = generate_synthetic(&SyntheticSpec::new(20, 0)).unwrap().corpus;
    let mc = ModelConfig {
        utterance_hidden: 32,
        dialogue_hidden: 64,
        head_hidden: 32,
        ..ModelConfig::default()
    };
    let tc = TrainConfig {
        learning_rate: 0.001,
        batch_size: 4,
        max_epochs: 200,
        patience: 200,
        ..TrainConfig::default()
    };
    let out = train(&mc, &tc, &c, &c).unwrap();
    let f1 = evaluate(&out.tagger, &c, Side::Both).unwrap().micro_f1;
    let encoded: Vec<EncodedDialogue> = c.dialogues.iter().map(|d| out.tagger.encode_dialogue(d, c.labeled).unwrap()).collect();
    let final_loss = out.tagger.batch_loss(&encoded).unwrap();
    let ratio = out.initial_loss / final_loss;
    let took = start.elapsed();
    verdict(
        f1 >= 0.99 && ratio >= 100.0 && took < Duration::from_secs(300),
        format!(
            "train micro-F1 {f1:.4} (best epoch {}), loss {:.2} -> {final_loss:.2} ({ratio:.0}x), {}",
            out.best_epoch,
            out.initial_loss,
            secs(took)
        ),
    )
}

fn fixture_model(seed: u64) -> ModelConfig {
    ModelConfig {
        utterance_hidden: 16,
        dialogue_hidden: 32,
        embedding_dim: 32,
        head_hidden: 16,
        seed,
        ..ModelConfig::default()
    }
}

fn fixture_schedule(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.005,
        batch_size: 10,
        max_epochs: 40,
        patience: 5,
        seed,
        ..TrainConfig::default()
    }
}

fn self_training_suite() -> Outcome {
    let mut wins = 0;
    let mut runs = Vec::new();
    for seed in 0..5 {
        let f = self_training_fixture(seed, &SelfTrainingSpec::default());
        let teacher = train(&fixture_model(seed), &fixture_schedule(seed), &f.source.train, &f.source.dev).unwrap().tagger;
        let cfg = SelfTrainConfig {
            student_model: fixture_model(seed),
            student_train: TrainConfig {
                max_epochs: 80,
                patience: 10,
                ..fixture_schedule(seed)
            },
            ..SelfTrainConfig::default()
        };
        let out = semi_supervised_run(&cfg, &teacher, &f.target_train, &f.target_test).unwrap();
        let (s, t) = (out.student_report.micro_f1, out.teacher_report.micro_f1);
        if s > t {
            wins += 1;
        }
        runs.push(format!("{s:.3}/{t:.3}"));
    }
    verdict(wins >= 4, format!("student beats teacher in {wins} of 5 seeds (student/teacher: {})", runs.join(" ")))
}

fn domain_ordering_suite() -> Outcome {
    let mut wins = 0;
    let mut runs = Vec::new();
    for seed in 0..5 {
        let data = domain_ablation_fixture(seed, 700);
        let run = |source| {
            let cfg = LooConfig {
                held_out_domain: SHIFTED_DOMAIN.into(),
                ood_turn_budget: 450,
                in_domain_turn_budget: 60,
                in_domain_label_source: source,
                model: fixture_model(seed),
                train: fixture_schedule(seed),
                seed,
                use_past_acts: false,
            };
            leave_one_domain_out(&data, None, &cfg).unwrap()
        };
        let (none, gold) = (run(LabelSource::None), run(LabelSource::Gold));
        let clean = none.audit.held_out_turns_in_train == 0;
        if gold.report.micro_f1 >= none.report.micro_f1 && clean {
            wins += 1;
        }
        runs.push(format!("{:.3}/{:.3}", gold.report.micro_f1, none.report.micro_f1));
    }
    verdict(wins >= 4, format!("gold >= none in {wins} of 5 seeds (gold/none: {})", runs.join(" ")))
}

const TEXT_CHARS: &[char] = &['a', 'b', 'y', 'e', 't', 'h', 'n', 'k', ' ', ' ', ',', '.', '?', '\'', '"', '\\', 'é', '€', '\t', '\n', '*', '_'];

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let words = ["bye", "thank", "you", "booking", "Good", "day"];
    let mut s = String::new();
    for _ in 0..rng.gen_range(0..6) {
        if rng.gen_bool(0.4) {
            s.push_str(words.choose(rng).unwrap());
        } else {
            for _ in 0..rng.gen_range(1..5) {
                s.push(*TEXT_CHARS.choose(rng).unwrap());
            }
        }
        s.push(' ');
    }
    s
}

/// A random native corpus whose acts come from the documented inventory (or
/// the heuristic table for MultiWOZ), with awkward utterance text.
fn random_native_corpus(seed: u64, inventory: &[(Namespace, Agent, DialogueAct)], woz_acts: &[DialogueAct]) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = *[Namespace::GsimR, Namespace::GsimM, Namespace::Dstc2, Namespace::Multiwoz].choose(&mut rng).unwrap();
    let labeled = if ns == Namespace::Multiwoz { Labeling::System } else { Labeling::Both };
    let dialogues = (0..rng.gen_range(0..4))
        .map(|i| {
            let turns = (0..rng.gen_range(1..6))
                .map(|k| {
                    let agent = if k % 2 == 0 { Agent::User } else { Agent::System };
                    let pool: Vec<&DialogueAct> = if ns == Namespace::Multiwoz {
                        if agent == Agent::User { vec![] } else { woz_acts.iter().collect() }
                    } else {
                        inventory.iter().filter(|(n, a, _)| *n == ns && *a == agent).map(|(_, _, act)| act).collect()
                    };
                    let acts = if pool.is_empty() {
                        vec![]
                    } else {
                        (0..rng.gen_range(0..4)).map(|_| (*pool.choose(&mut rng).unwrap()).clone()).collect()
                    };
                    let domain = rng.gen_bool(0.5).then(|| ["taxi", "hotel"].choose(&mut rng).unwrap().to_string());
                    Turn::new(agent, random_text(&mut rng), acts).with_domain(domain)
                })
                .collect();
            Dialogue::new(format!("d{i}"), turns)
        })
        .collect();
    let split = *[Split::Train, Split::Dev, Split::Test].choose(&mut rng).unwrap();
    Corpus::new(ns, split, labeled, dialogues)
}

fn property_suite() -> Outcome {
    let start = Instant::now();
    let rules = RuleSet::default_v1();
    let inventory = documented_inventory();
    let woz: Vec<DialogueAct> = heuristic_fixtures().into_iter().flat_map(|f| f.acts).collect();
    let mut runner = TestRunner::new(PropConfig {
        cases: 10_000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let result = runner.run(&proptest::num::u64::ANY, |seed| {
        let c = random_native_corpus(seed, &inventory, &woz);
        c.check().map_err(|e| TestCaseError::fail(format!("generator: {e}")))?;
        for corpus in [c.clone(), align_corpus(&c, &rules).map_err(|e| TestCaseError::fail(e.to_string()))?] {
            let violations = validate_universal(&corpus);
            if corpus.source == Namespace::Universal && !violations.is_empty() {
                return Err(TestCaseError::fail(format!("aligned corpus not schema-clean: {violations:?}")));
            }
            let mut buf = Vec::new();
            write_canonical(&corpus, &mut buf).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let back = read_canonical(&buf[..], std::path::Path::new("<memory>")).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if back != corpus {
                return Err(TestCaseError::fail("canonical round trip changed the corpus"));
            }
        }
        Ok(())
    });
    let took = start.elapsed();
    match result {
        Ok(()) => verdict(
            took < Duration::from_secs(60),
            format!("10000 random corpora: native and aligned round trips identical, aligned output schema-clean, {}", secs(took)),
        ),
        Err(e) => Outcome::Fail(format!("{e}")),
    }
}

fn within(got: f64, want: f64, tol: f64, label: &str, lines: &mut Vec<String>) -> bool {
    let ok = (got - want).abs() <= tol;
    lines.push(format!("{label} {got:.3} (target {want:.3} +/- {tol})"));
    ok
}

fn real_data_suite() -> Outcome {
    let Some(root) = data_root() else {
        return Outcome::Skip("UDAT_DATA_DIR not set; real-data targets not run".into());
    };
    let all = [Namespace::GsimR, Namespace::GsimM, Namespace::Dstc2, Namespace::Multiwoz];
    let missing: Vec<String> = all.iter().filter(|&&ns| !is_available(&root, ns)).map(|ns| ns.to_string()).collect();
    if !missing.is_empty() {
        return Outcome::Skip(format!("datasets missing under {}: {missing:?}", root.display()));
    }
    let rules = RuleSet::default_v1();
    let mut lines = Vec::new();
    let mut ok = true;

    for (ns, want) in [(Namespace::GsimR, 3878), (Namespace::Dstc2, 306)] {
        let s = compute_stats(&load_splits(&root, ns).unwrap().train).unwrap();
        ok &= s.n_unique_system_turns == want;
        lines.push(format!("{ns} unique system turns {} (target {want})", s.n_unique_system_turns));
    }

    let embeddings = std::env::var_os("UDAT_EMBEDDINGS").map(std::path::PathBuf::from);
    let mc = ModelConfig::default();
    let tc = TrainConfig {
        pretrained_embeddings: embeddings,
        ..TrainConfig::default()
    };
    let singles: Vec<(String, DatasetSplits)> = [Namespace::GsimR, Namespace::GsimM, Namespace::Dstc2]
        .iter()
        .map(|&ns| (ns.to_string(), load_aligned(&root, ns, &rules).unwrap()))
        .collect();
    let matrix = transfer_matrix(&singles, &mc, &tc, Side::Both).unwrap();
    for ((name, _), want) in singles.iter().zip([0.892, 0.914, 0.920]) {
        ok &= within(matrix.cell(name, name).unwrap(), want, 0.03, &format!("{name} diagonal"), &mut lines);
    }

    let trains: Vec<&Corpus> = singles.iter().map(|(_, s)| &s.train).collect();
    let devs: Vec<&Corpus> = singles.iter().map(|(_, s)| &s.dev).collect();
    let udat = train_pooled(&mc, &tc, &trains, &devs).unwrap().tagger;
    let woz = load_aligned(&root, Namespace::Multiwoz, &rules).unwrap();
    let udat_f1 = evaluate(&udat, &woz.test, Side::System).unwrap().micro_f1;
    ok &= within(udat_f1, 0.541, 0.03, "U-DAT on MultiWOZ", &mut lines);

    let cfg = SelfTrainConfig {
        student_model: mc.clone(),
        student_train: tc.clone(),
        ..SelfTrainConfig::default()
    };
    let semi = semi_supervised_run(&cfg, &udat, &woz.train, &woz.test).unwrap();
    ok &= within(semi.student_report.micro_f1, 0.577, 0.03, "semi-supervised", &mut lines);

    let domains: Vec<String> = ["restaurant", "hotel", "attraction", "taxi", "train"].iter().map(|s| s.to_string()).collect();
    let base = LooConfig {
        held_out_domain: String::new(),
        ood_turn_budget: 3000,
        in_domain_turn_budget: 300,
        in_domain_label_source: LabelSource::None,
        model: mc.clone(),
        train: tc.clone(),
        seed: 0,
        use_past_acts: false,
    };
    let table = domain_ablation(&woz, Some(&udat), &domains, &base).unwrap();
    ok &= within(table.average.none, 0.702, 0.03, "LOO none", &mut lines);
    ok &= within(table.average.semi.unwrap_or(f64::NAN), 0.712, 0.03, "LOO semi", &mut lines);
    ok &= within(table.average.gold, 0.734, 0.03, "LOO gold", &mut lines);
    verdict(ok, lines.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("alignment fixtures", alignment_fixture_suite),
        ("heuristic fixtures", heuristic_fixture_suite),
        ("gradient check", gradient_check_suite),
        ("loss constant", loss_constant_suite),
        ("F1 oracle", f1_oracle_suite),
        ("overfit", overfit_suite),
        ("self-training direction", self_training_suite),
        ("leave-one-domain-out ordering", domain_ordering_suite),
        ("round-trip and validation properties", property_suite),
        ("real-data targets", real_data_suite),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id:>2} {tag} {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
