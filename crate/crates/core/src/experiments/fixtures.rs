//! Seeded synthetic fixtures for the self-training and domain-ablation
//! protocols.
//!
//! The self-training fixture has a labeled source domain and a shifted
//! target domain:
//!
//! * In the source each system act is a fixed response to the preceding
//!   user act, and a share of system turns use generic phrases ("okay",
//!   "sure") that only the previous user act disambiguates. A tagger
//!   trained there learns to lean on the past-act window.
//! * In the target the system act is independent of the user act and
//!   system turns always use act-specific phrases. The teacher's context
//!   now misleads it on the turns where the flow disagrees with the text.
//!   A text-only student trained on the teacher's labels learns the
//!   majority label of each phrase.
//!
//! The domain-ablation fixture is the task-oriented grammar with one domain
//! whose system phrasing is largely its own.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    generate_synthetic, split_by_hash, ActGrammar, Agent, Corpus, Dialogue, DialogueAct, Labeling, Namespace, Split,
    SyntheticSpec, Turn,
};
use crate::training::DatasetSplits;

/// User act, its phrasings, and the system act that answers it in the
/// source.
const USER_ACTS: [(&str, &[&str], &str); 6] = [
    ("inform", &["i want {food} food", "looking for {food} food"], "sys-offer"),
    ("request", &["what is the phone number", "what is the address"], "inform"),
    ("affirm", &["yes", "yes please"], "sys-notify-success"),
    ("user-negate", &["no", "no thanks"], "request"),
    ("thank-you", &["thank you", "thanks a lot"], "bye"),
    ("deny", &["that is wrong", "not what i said"], "sys-expl-confirm"),
];

const SYSTEM_ACTS: [(&str, &[&str]); 6] = [
    ("sys-offer", &["how about {name}", "{name} is a good choice"]),
    ("inform", &["the number is {phone}", "it is on {street}"]),
    ("sys-notify-success", &["your table is booked", "the booking is confirmed"]),
    ("request", &["which area do you prefer", "what price range would you like"]),
    ("bye", &["goodbye", "have a nice day"]),
    ("sys-expl-confirm", &["did you say {food} food", "so {food} food , right"]),
];

const GENERIC: [&str; 4] = ["okay", "sure", "alright then", "one moment"];

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    const FOOD: [&str; 4] = ["thai", "italian", "indian", "chinese"];
    const NAME: [&str; 3] = ["golden wok", "pizza hut", "curry garden"];
    const PHONE: [&str; 3] = ["01223 351880", "01223 365068", "01223 302330"];
    const STREET: [&str; 3] = ["mill road", "regent street", "hills road"];
    let mut s = template.to_string();
    for (key, values) in [("{food}", &FOOD[..]), ("{name}", &NAME[..]), ("{phone}", &PHONE[..]), ("{street}", &STREET[..])] {
        while s.contains(key) {
            s = s.replacen(key, values.choose(rng).expect("non-empty"), 1);
        }
    }
    s
}

fn system_templates(act: &str) -> &'static [&'static str] {
    SYSTEM_ACTS.iter().find(|(a, _)| *a == act).expect("known system act").1
}

fn dialogue(id: String, target: bool, spec: &SelfTrainingSpec, rng: &mut ChaCha8Rng) -> Dialogue {
    let exchanges = rng.gen_range(2..=4);
    let mut turns = Vec::with_capacity(2 * exchanges);
    for _ in 0..exchanges {
        let (user_act, phrasing, response) = USER_ACTS[rng.gen_range(0..USER_ACTS.len())];
        let text = fill(phrasing.choose(rng).expect("non-empty"), rng);
        turns.push(Turn::new(Agent::User, text, vec![DialogueAct::universal(user_act)]));

        let sys_act = if target || rng.gen::<f64>() < spec.flow_noise {
            SYSTEM_ACTS[rng.gen_range(0..SYSTEM_ACTS.len())].0
        } else {
            response
        };
        let text = if !target && rng.gen::<f64>() < spec.generic_rate {
            GENERIC.choose(rng).expect("non-empty").to_string()
        } else {
            fill(system_templates(sys_act).choose(rng).expect("non-empty"), rng)
        };
        turns.push(Turn::new(Agent::System, text, vec![DialogueAct::universal(sys_act)]));
    }
    Dialogue::new(id, turns)
}

fn corpus(prefix: &str, n: usize, target: bool, spec: &SelfTrainingSpec, split: Split, rng: &mut ChaCha8Rng) -> Corpus {
    let dialogues = (0..n).map(|i| dialogue(format!("{prefix}-{i:04}"), target, spec, rng)).collect();
    let c = Corpus::new(Namespace::Universal, split, Labeling::Both, dialogues);
    if target {
        only_system_labels(c)
    } else {
        c
    }
}

fn only_system_labels(mut c: Corpus) -> Corpus {
    for t in c.dialogues.iter_mut().flat_map(|d| &mut d.turns) {
        if t.agent == Agent::User {
            t.acts.clear();
        }
    }
    c.labeled = Labeling::System;
    c
}

#[derive(Clone, Debug)]
pub struct SelfTrainingFixture {
    /// Fully labeled source-domain data for the teacher.
    pub source: DatasetSplits,
    /// Target-domain dialogues with gold system acts (strip before use as
    /// unlabeled data).
    pub target_train: Corpus,
    pub target_test: Corpus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelfTrainingSpec {
    pub n_source: usize,
    pub n_target: usize,
    pub n_test: usize,
    /// Share of source system turns phrased generically.
    pub generic_rate: f64,
    /// Share of source system turns whose act ignores the user act.
    pub flow_noise: f64,
}

impl Default for SelfTrainingSpec {
    fn default() -> Self {
        SelfTrainingSpec {
            n_source: 150,
            n_target: 150,
            n_test: 60,
            generic_rate: 0.4,
            flow_noise: 0.3,
        }
    }
}

pub fn self_training_fixture(seed: u64, spec: &SelfTrainingSpec) -> SelfTrainingFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dev = (spec.n_source / 5).max(1);
    SelfTrainingFixture {
        source: DatasetSplits {
            train: corpus("src", spec.n_source, false, spec, Split::Train, &mut rng),
            dev: corpus("src-dev", n_dev, false, spec, Split::Dev, &mut rng),
            test: corpus("src-test", n_dev, false, spec, Split::Test, &mut rng),
        },
        target_train: corpus("tgt", spec.n_target, true, spec, Split::Train, &mut rng),
        target_test: corpus("tgt-test", spec.n_test, true, spec, Split::Test, &mut rng),
    }
}

/// Held-out domain of [`domain_ablation_fixture`].
pub const SHIFTED_DOMAIN: &str = "taxi";

/// Multi-domain system-labeled corpus in which [`SHIFTED_DOMAIN`] phrases
/// most system acts with its own templates.
pub fn domain_ablation_fixture(seed: u64, n_dialogues: usize) -> DatasetSplits {
    let mut grammar = ActGrammar::task_oriented();
    let taxi = grammar
        .domains
        .iter_mut()
        .find(|d| d.name == SHIFTED_DOMAIN)
        .expect("grammar has the domain");
    for (act, templates) in [
        ("sys-offer", &["{name} will pick you up", "{name} is booked to collect you"][..]),
        ("request", &["where should the cab collect you", "when do you want the car"]),
        ("inform", &["the driver can be reached on {phone}", "the cab drops you in the {area}"]),
        ("sys-expl-confirm", &["so the car goes to the {area} , right"]),
        ("sys-impl-confirm", &["a cab to the {area} then"]),
        ("sys-notify-success", &["your cab is on its way", "the driver has been dispatched"]),
        ("sys-notify-failure", &["no cabs are free right now"]),
    ] {
        taxi.templates.insert(act.into(), templates.iter().map(|s| s.to_string()).collect());
    }
    let spec = SyntheticSpec {
        grammar,
        id_prefix: "loo".into(),
        ..SyntheticSpec::new(n_dialogues, seed)
    };
    let all = only_system_labels(generate_synthetic(&spec).expect("valid grammar").corpus);
    let (train, dev, test) = split_by_hash(&all, seed, 0.15, 0.25);
    DatasetSplits { train, dev, test }
}
