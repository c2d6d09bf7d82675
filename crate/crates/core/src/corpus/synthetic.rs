//! Seeded synthetic dialogues for desk-scale experiments.
//!
//! Each turn draws every act allowed for its agent independently with the
//! production's probability; when nothing is drawn the agent's fallback act
//! is used. The utterance concatenates one filled template per drawn act, in
//! production order, so the act set is recoverable from the surface text.
//! A dialogue belongs to one domain, which may override slot lexicons and
//! templates.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, Corpus, CorpusError, Dialogue, DialogueAct, Labeling, Namespace, Result, Split, Turn};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActProduction {
    pub act: String,
    pub agent: Agent,
    pub prob: f64,
    pub templates: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainLexicon {
    pub name: String,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub slots: BTreeMap<String, Vec<String>>,
    /// Act name → templates used instead of the shared ones.
    #[serde(default)]
    pub templates: BTreeMap<String, Vec<String>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActGrammar {
    pub min_turns: usize,
    pub max_turns: usize,
    pub productions: Vec<ActProduction>,
    pub fallback_user: String,
    pub fallback_system: String,
    pub domains: Vec<DomainLexicon>,
    /// Probability that a domain template replaces the shared one when the
    /// domain defines templates for the act.
    #[serde(default = "one")]
    pub domain_phrase_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_dialogues: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default = "ActGrammar::task_oriented")]
    pub grammar: ActGrammar,
    #[serde(default = "default_prefix")]
    pub id_prefix: String,
}

fn default_prefix() -> String {
    "syn".into()
}

impl SyntheticSpec {
    pub fn new(n_dialogues: usize, seed: u64) -> Self {
        SyntheticSpec {
            n_dialogues,
            seed,
            noise_rate: 0.0,
            grammar: ActGrammar::task_oriented(),
            id_prefix: default_prefix(),
        }
    }
}

/// A generated corpus plus, per dialogue and turn, the act set its utterance
/// was rendered from (equal to the labels when `noise_rate` is 0).
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub template_acts: Vec<Vec<BTreeSet<String>>>,
}

impl ActGrammar {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CorpusError::Invalid(m));
        if self.min_turns == 0 || self.min_turns > self.max_turns {
            return bad(format!("bad turn range {}..={}", self.min_turns, self.max_turns));
        }
        if self.domains.is_empty() || self.domains.iter().any(|d| d.weight <= 0.0) {
            return bad("grammar needs at least one positively weighted domain".into());
        }
        for (agent, fallback) in [(Agent::User, &self.fallback_user), (Agent::System, &self.fallback_system)] {
            if !self.productions.iter().any(|p| p.agent == agent && &p.act == fallback) {
                return bad(format!("fallback `{fallback}` is not a {agent} production"));
            }
        }
        for p in &self.productions {
            if !(0.0..=1.0).contains(&p.prob) || p.templates.is_empty() {
                return bad(format!("production `{}` needs a probability in [0,1] and templates", p.act));
            }
        }
        for d in &self.domains {
            for p in &self.productions {
                let templates = p.templates.iter().chain(d.templates.get(&p.act).into_iter().flatten());
                for t in templates {
                    for slot in placeholders(t) {
                        if !d.slots.get(slot).is_some_and(|v| !v.is_empty()) {
                            return bad(format!("domain `{}` has no values for `{{{slot}}}`", d.name));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn productions_for(&self, agent: Agent) -> impl Iterator<Item = &ActProduction> {
        self.productions.iter().filter(move |p| p.agent == agent)
    }

    /// A grammar over all twenty universal acts with five task domains.
    pub fn task_oriented() -> ActGrammar {
        use Agent::{System as S, User as U};
        let p = |act: &str, agent, prob, templates: &[&str]| ActProduction {
            act: act.into(),
            agent,
            prob,
            templates: templates.iter().map(|s| s.to_string()).collect(),
        };
        let productions = vec![
            p("user-hi", U, 0.06, &["hello", "hi there"]),
            p("inform", U, 0.55, &["i want {food} food", "somewhere in the {area}", "{food} please"]),
            p("request", U, 0.20, &["what is the phone number", "could you tell me the address"]),
            p("affirm", U, 0.12, &["yes", "yes that is right"]),
            p("deny", U, 0.04, &["that is wrong", "not that one"]),
            p("user-negate", U, 0.05, &["no", "no way"]),
            p("user-confirm", U, 0.05, &["is it in the {area}", "does it serve {food} food"]),
            p("reqalts", U, 0.06, &["anything else", "how about another one"]),
            p("ack", U, 0.03, &["okay", "alright"]),
            p("repeat", U, 0.03, &["sorry can you repeat that", "say that again"]),
            p("restart", U, 0.02, &["start over", "let us begin again"]),
            p("thank-you", U, 0.08, &["thank you", "thanks a lot"]),
            p("bye", U, 0.06, &["goodbye", "bye now"]),
            p("sys-hi", S, 0.06, &["welcome , how may i help", "hello , what can i do for you"]),
            p("sys-offer", S, 0.35, &["{name} is a nice place", "how about {name}", "i found {name}"]),
            p("request", S, 0.25, &["what kind of food would you like", "which area do you prefer"]),
            p("inform", S, 0.20, &["the phone number is {phone}", "it is in the {area}"]),
            p("sys-expl-confirm", S, 0.08, &["you want {food} food , right", "did you say {area}"]),
            p("sys-impl-confirm", S, 0.08, &["ok {food} food", "alright , the {area}"]),
            p("sys-notify-success", S, 0.06, &["your booking is confirmed", "all set , it is booked"]),
            p("sys-notify-failure", S, 0.06, &["sorry there is no such place", "i could not find anything"]),
            p("sys-negate", S, 0.04, &["no it is not", "that is not the case"]),
            p("affirm", S, 0.03, &["yes it is", "indeed"]),
            p("reqalts", S, 0.05, &["anything else i can help with", "is there anything else"]),
            p("thank-you", S, 0.03, &["thank you for calling"]),
            p("bye", S, 0.04, &["have a nice day", "goodbye then"]),
        ];
        let lex = |name: &str, slots: &[(&str, &[&str])]| DomainLexicon {
            name: name.into(),
            weight: 1.0,
            slots: slots
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
            templates: BTreeMap::new(),
        };
        let areas: &[&str] = &["north", "south", "centre", "east", "west"];
        let phones: &[&str] = &["01223 351880", "01223 365068", "01223 302330"];
        let mut domains = vec![
            lex(
                "restaurant",
                &[
                    ("food", &["thai", "italian", "chinese", "indian"]),
                    ("area", areas),
                    ("name", &["golden wok", "pizza hut", "curry garden"]),
                    ("phone", phones),
                ],
            ),
            lex(
                "hotel",
                &[
                    ("food", &["breakfast", "continental"]),
                    ("area", areas),
                    ("name", &["acorn guest house", "the lensfield"]),
                    ("phone", phones),
                ],
            ),
            lex(
                "attraction",
                &[
                    ("food", &["picnic", "cafe"]),
                    ("area", areas),
                    ("name", &["kings college", "the fitzwilliam museum"]),
                    ("phone", phones),
                ],
            ),
            lex(
                "taxi",
                &[
                    ("food", &["snack"]),
                    ("area", areas),
                    ("name", &["a red toyota", "a black skoda"]),
                    ("phone", phones),
                ],
            ),
            lex(
                "train",
                &[
                    ("food", &["trolley"]),
                    ("area", areas),
                    ("name", &["tr1234 to london", "tr9876 to ely"]),
                    ("phone", phones),
                ],
            ),
        ];
        domains[1]
            .templates
            .insert("sys-offer".into(), vec!["{name} has rooms free".into()]);
        domains[3]
            .templates
            .insert("sys-offer".into(), vec!["{name} will pick you up".into()]);
        domains[4]
            .templates
            .insert("sys-offer".into(), vec!["there is {name}".into()]);
        ActGrammar {
            min_turns: 4,
            max_turns: 8,
            productions,
            fallback_user: "inform".into(),
            fallback_system: "sys-offer".into(),
            domains,
            domain_phrase_rate: 1.0,
        }
    }
}

fn placeholders(template: &str) -> impl Iterator<Item = &str> {
    template.split('{').skip(1).filter_map(|rest| rest.split_once('}').map(|(slot, _)| slot))
}

/// Substitutes `{slot}` placeholders, returning the text and the filled arguments.
fn fill(template: &str, domain: &DomainLexicon, rng: &mut ChaCha8Rng) -> (String, Vec<(String, String)>) {
    let mut out = String::new();
    let mut args = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').expect("validated template");
        let slot = &after[..close];
        let value = domain.slots[slot].choose(rng).expect("validated lexicon").clone();
        out.push_str(&value);
        args.push((slot.to_string(), value));
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    (out, args)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    let g = &spec.grammar;
    g.validate()?;
    if !(0.0..=1.0).contains(&spec.noise_rate) {
        return Err(CorpusError::Invalid(format!("noise rate {} outside [0,1]", spec.noise_rate)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total_weight: f64 = g.domains.iter().map(|d| d.weight).sum();
    let mut dialogues = Vec::with_capacity(spec.n_dialogues);
    let mut template_acts = Vec::with_capacity(spec.n_dialogues);

    for n in 0..spec.n_dialogues {
        let mut pick = rng.gen::<f64>() * total_weight;
        let domain = g
            .domains
            .iter()
            .find(|d| {
                pick -= d.weight;
                pick < 0.0
            })
            .unwrap_or_else(|| g.domains.last().expect("validated"));
        let n_turns = rng.gen_range(g.min_turns..=g.max_turns);
        let mut turns = Vec::with_capacity(n_turns);
        let mut rendered = Vec::with_capacity(n_turns);
        for i in 0..n_turns {
            let agent = if i % 2 == 0 { Agent::User } else { Agent::System };
            let prods: Vec<&ActProduction> = g.productions_for(agent).collect();
            let mut chosen: Vec<usize> = (0..prods.len()).filter(|&k| rng.gen::<f64>() < prods[k].prob).collect();
            if chosen.is_empty() {
                let fallback = match agent {
                    Agent::User => &g.fallback_user,
                    Agent::System => &g.fallback_system,
                };
                chosen.push(prods.iter().position(|p| &p.act == fallback).expect("validated"));
            }

            let mut phrases = Vec::new();
            let mut acts = Vec::new();
            for &k in &chosen {
                let prod = prods[k];
                let templates = match domain.templates.get(&prod.act) {
                    Some(t) if !t.is_empty() && rng.gen::<f64>() < g.domain_phrase_rate => t,
                    _ => &prod.templates,
                };
                let template = templates.choose(&mut rng).expect("validated");
                let (text, args) = fill(template, domain, &mut rng);
                phrases.push(text);
                let mut act = DialogueAct::universal(prod.act.clone());
                for (s, v) in args {
                    act = act.with_arg(&s, v);
                }
                acts.push(act);
            }
            let template_set: BTreeSet<String> = acts.iter().map(|a| a.name.clone()).collect();

            if spec.noise_rate > 0.0 && rng.gen::<f64>() < spec.noise_rate {
                let flip = &prods[rng.gen_range(0..prods.len())].act;
                if let Some(pos) = acts.iter().position(|a| &a.name == flip) {
                    acts.remove(pos);
                } else {
                    acts.push(DialogueAct::universal(flip.clone()));
                }
            }
            turns.push(Turn::new(agent, phrases.join(" "), acts).with_domain(Some(domain.name.clone())));
            rendered.push(template_set);
        }
        dialogues.push(Dialogue::new(format!("{}-{:05}", spec.id_prefix, n), turns));
        template_acts.push(rendered);
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::new(Namespace::Universal, Split::Train, Labeling::Both, dialogues),
        template_acts,
    })
}

fn fnv1a(seed: u64, text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(text.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finalizer: FNV alone leaves the high bits poorly mixed
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Partitions dialogues into train/dev/test by a seeded hash of their id.
pub fn split_by_hash(corpus: &Corpus, seed: u64, dev_fraction: f64, test_fraction: f64) -> (Corpus, Corpus, Corpus) {
    let mut parts = [Vec::new(), Vec::new(), Vec::new()];
    for d in &corpus.dialogues {
        let u = (fnv1a(seed, &d.id) >> 11) as f64 / (1u64 << 53) as f64;
        let k = if u < test_fraction {
            2
        } else if u < test_fraction + dev_fraction {
            1
        } else {
            0
        };
        parts[k].push(d.clone());
    }
    let [train, dev, test] = parts;
    let make = |split, dialogues| Corpus {
        dialogues,
        split,
        ..corpus.clone()
    };
    (make(Split::Train, train), make(Split::Dev, dev), make(Split::Test, test))
}
