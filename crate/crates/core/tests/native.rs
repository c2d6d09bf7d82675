use std::fs;
use std::path::Path;

use serde_json::json;
use udat::corpus::*;
use udat::schema::{align_corpus, validate_universal, RuleSet};

fn write(path: &Path, value: &serde_json::Value) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn names(t: &Turn) -> Vec<String> {
    t.acts.iter().map(|a| a.to_string()).collect()
}

#[test]
fn gsim_dialogue_with_slot_spans() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim-R").join("train.json");
    write(
        &path,
        &json!([{
            "dialogue_id": "d1",
            "turns": [
                {
                    "user_acts": [{"type": "INFORM", "slot": "food"}],
                    "user_utterance": {
                        "text": "i want thai food",
                        "tokens": ["i", "want", "thai", "food"],
                        "slots": [{"slot": "food", "start": 2, "exclusive_end": 3}]
                    }
                },
                {
                    "system_acts": [{"type": "REQUEST", "slot": "location"}],
                    "system_utterance": {"text": "where should it be", "tokens": ["where", "should", "it", "be"], "slots": []},
                    "user_acts": [{"type": "THANK_YOU"}],
                    "user_utterance": {"text": "thanks", "tokens": ["thanks"], "slots": []}
                }
            ]
        }]),
    );
    let c = load_native(Namespace::GsimR, &path).unwrap();
    assert_eq!(c.split, Split::Train);
    assert_eq!(c.labeled, Labeling::Both);
    let d = &c.dialogues[0];
    let agents: Vec<Agent> = d.turns.iter().map(|t| t.agent).collect();
    assert_eq!(agents, [Agent::User, Agent::System, Agent::User]);
    assert_eq!(names(&d.turns[0]), ["inform(food=thai)"]);
    assert_eq!(names(&d.turns[1]), ["request(location)"]);
    assert_eq!(names(&d.turns[2]), ["thank_you()"]);
    assert_eq!(d.domains.iter().collect::<Vec<_>>(), ["restaurant"]);

    let aligned = align_corpus(&c, &RuleSet::default_v1()).unwrap();
    assert!(validate_universal(&aligned).is_empty());
    assert_eq!(aligned.source, Namespace::Universal);
}

#[test]
fn gsim_empty_list_and_bad_span() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dev.json");
    write(&path, &json!([]));
    let c = load_native(Namespace::GsimM, &path).unwrap();
    assert!(c.is_empty());
    assert_eq!(c.split, Split::Dev);

    write(
        &path,
        &json!([{"dialogue_id": "x", "turns": [{
            "user_utterance": {"text": "hi", "tokens": ["hi"], "slots": [{"slot": "a", "start": 0, "exclusive_end": 4}]}
        }]}]),
    );
    let err = load_native(Namespace::GsimM, &path).unwrap_err().to_string();
    assert!(err.contains("outside") && err.contains("dialogue x"), "{err}");
}

#[test]
fn dstc2_call_directory() {
    let dir = tempfile::tempdir().unwrap();
    let call = dir.path().join("data").join("Mar13_S0A0").join("voip-1");
    write(
        &call.join("log.json"),
        &json!({"session-id": "voip-1", "turns": [
            {"output": {"transcript": "Hello , welcome", "dialog-acts": [{"act": "welcomemsg", "slots": []}]}},
            {"output": {"transcript": "What part of town ?", "dialog-acts": [{"act": "request", "slots": [["slot", "area"]]}]}}
        ]}),
    );
    write(
        &call.join("label.json"),
        &json!({"session-id": "voip-1", "turns": [
            {"transcription": "cheap food", "semantics": {"json": [{"act": "inform", "slots": [["pricerange", "cheap"]]}]}},
            {"transcription": "noise", "semantics": {"json": [{"act": "null", "slots": []}]}}
        ]}),
    );
    let flist = dir.path().join("dstc2_test.flist");
    fs::write(&flist, "Mar13_S0A0/voip-1\n").unwrap();

    for path in [dir.path().join("data"), flist] {
        let c = load_native(Namespace::Dstc2, &path).unwrap();
        let t = &c.dialogues[0].turns;
        assert_eq!(c.dialogues[0].id, "voip-1");
        assert_eq!(t.len(), 4);
        assert_eq!(names(&t[0]), ["welcomemsg()"]);
        assert_eq!(names(&t[1]), ["inform(pricerange=cheap)"]);
        assert_eq!(names(&t[2]), ["request(area)"]);
        assert!(t[3].acts.is_empty());
        assert_eq!(t[0].agent, Agent::System);
    }
    assert_eq!(load_native(Namespace::Dstc2, &dir.path().join("dstc2_test.flist")).unwrap().split, Split::Test);
}

#[test]
fn dstc2_mismatched_turn_counts() {
    let dir = tempfile::tempdir().unwrap();
    let call = dir.path().join("voip-2");
    write(&call.join("log.json"), &json!({"session-id": "voip-2", "turns": [
        {"output": {"transcript": "hi", "dialog-acts": []}}
    ]}));
    write(&call.join("label.json"), &json!({"session-id": "voip-2", "turns": []}));
    let err = load_native(Namespace::Dstc2, dir.path()).unwrap_err().to_string();
    assert!(err.contains("label.json") && err.contains("voip-2"), "{err}");
}

fn multiwoz_fixture(dir: &Path) {
    write(
        &dir.join("data.json"),
        &json!({
            "PMUL1.json": {"log": [
                {"text": "I need a cheap restaurant"},
                {"text": "The Golden Wok is cheap . Shall I book it ?", "dialog_act": {
                    "Restaurant-Inform": [["Name", "golden wok"], ["Price", "cheap"]],
                    "Booking-Inform": [["none", "none"]]
                }},
                {"text": "No thanks , bye"},
                {"text": "Goodbye"}
            ]},
            "SNG2.json": {"log": [
                {"text": "Book a taxi"},
                {"text": "Where to ?"}
            ]}
        }),
    );
    write(
        &dir.join("dialogue_acts.json"),
        &json!({"PMUL1": {"2": {"general-bye": [["none", "none"]]}}, "SNG2": {"1": {"Taxi-Request": [["Dest", "?"]]}}}),
    );
    fs::write(dir.join("valListFile.json"), "SNG2.json\n").unwrap();
    fs::write(dir.join("testListFile.json"), "").unwrap();
}

#[test]
fn multiwoz_turns_acts_and_splits() {
    let dir = tempfile::tempdir().unwrap();
    multiwoz_fixture(dir.path());
    let c = load_native(Namespace::Multiwoz, dir.path()).unwrap();
    assert_eq!(c.labeled, Labeling::System);
    assert_eq!(c.dialogues.len(), 2);
    let d = &c.dialogues[0];
    assert_eq!(d.id, "PMUL1");
    assert_eq!(names(&d.turns[1]), ["Restaurant-Inform(name=golden wok,price=cheap)", "Booking-Inform(none=none)"]);
    assert_eq!(names(&d.turns[3]), ["general-bye(none=none)"]);
    assert!(d.turns[0].acts.is_empty());
    assert_eq!(d.domains.iter().collect::<Vec<_>>(), ["restaurant"]);
    assert_eq!(c.dialogues[1].domains.iter().collect::<Vec<_>>(), ["taxi"]);

    let dev = load_native_split(Namespace::Multiwoz, dir.path(), Some(Split::Dev)).unwrap();
    assert_eq!(dev.dialogues.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), ["SNG2"]);
    let train = load_native_split(Namespace::Multiwoz, dir.path(), Some(Split::Train)).unwrap();
    assert_eq!(train.dialogues.len(), 1);
}

#[test]
fn multiwoz_canonical_round_trip_after_alignment() {
    let dir = tempfile::tempdir().unwrap();
    multiwoz_fixture(dir.path());
    let c = load_native(Namespace::Multiwoz, dir.path()).unwrap();
    let aligned = align_corpus(&c, &RuleSet::default_v1()).unwrap();
    assert!(validate_universal(&aligned).is_empty());
    let out = dir.path().join("aligned.jsonl");
    save_canonical(&aligned, &out).unwrap();
    assert_eq!(load_canonical(&out).unwrap(), aligned);
    let raw = dir.path().join("raw.jsonl");
    save_canonical(&c, &raw).unwrap();
    assert_eq!(load_canonical(&raw).unwrap(), c);
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.json");
    fs::write(&path, "[{\"dialogue_id\": }]").unwrap();
    match load_native(Namespace::GsimR, &path) {
        Err(CorpusError::Syntax { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected a syntax error, got {other:?}"),
    }
}

#[test]
fn stats_survive_canonical_round_trip() {
    let c = generate_synthetic(&SyntheticSpec::new(30, 9)).unwrap().corpus;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    save_canonical(&c, &path).unwrap();
    let back = load_canonical(&path).unwrap();
    assert_eq!(compute_stats(&back).unwrap(), compute_stats(&c).unwrap());
    let s = compute_stats(&c).unwrap();
    assert_eq!(s.n_dialogues, 30);
    assert_eq!(s.n_system_turns, c.count_side(Side::System));
    assert!(s.n_unique_system_turns <= s.n_system_turns);
}
