//! Input→output cases for every row of the alignment and heuristic tables.
//! Expected outputs are written out by hand from the tables, independently of
//! the rule file, so running them checks the shipped rules.

use serde::Serialize;

use super::{align_turn, RuleSet};
use crate::corpus::{Agent, DialogueAct, Namespace, SlotValue, Turn};

#[derive(Clone, Debug, Serialize)]
pub struct Fixture {
    pub row: String,
    pub namespace: Namespace,
    pub agent: Agent,
    pub utterance: String,
    pub acts: Vec<DialogueAct>,
    pub expected: Vec<DialogueAct>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureOutcome {
    pub row: String,
    pub passed: bool,
    pub expected: Vec<String>,
    pub got: Result<Vec<String>, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureReport {
    pub total: usize,
    pub passed: usize,
    pub outcomes: Vec<FixtureOutcome>,
}

impl FixtureReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }

    pub fn failures(&self) -> impl Iterator<Item = &FixtureOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

pub fn run_fixtures(fixtures: &[Fixture], rules: &RuleSet) -> FixtureReport {
    let show = |v: &[DialogueAct]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>();
    let outcomes: Vec<FixtureOutcome> = fixtures
        .iter()
        .map(|f| {
            let turn = Turn::new(f.agent, f.utterance.clone(), f.acts.clone());
            let got = align_turn(&turn, f.namespace, rules);
            FixtureOutcome {
                row: f.row.clone(),
                passed: got.as_ref().is_ok_and(|g| g == &f.expected),
                expected: show(&f.expected),
                got: got.map(|g| show(&g)).map_err(|e| e.to_string()),
            }
        })
        .collect();
    FixtureReport {
        total: outcomes.len(),
        passed: outcomes.iter().filter(|o| o.passed).count(),
        outcomes,
    }
}

fn native(ns: Namespace, name: &str, args: &[(&str, &str)]) -> DialogueAct {
    DialogueAct::new(ns, name).with_args(args.iter().map(|(s, v)| SlotValue::new(s, *v)))
}

fn univ(name: &str, args: &[(&str, &str)]) -> DialogueAct {
    DialogueAct::universal(name).with_args(args.iter().map(|(s, v)| SlotValue::new(s, *v)))
}

type Args<'a> = &'a [(&'a str, &'a str)];

/// One fixture per (dataset column, row, agent) of the alignment table.
pub fn alignment_fixtures() -> Vec<Fixture> {
    use Agent::{System as S, User as U};
    use Namespace::{Dstc2, GsimM, GsimR};
    const GSIM: [Namespace; 2] = [GsimR, GsimM];
    const ALL: [Namespace; 3] = [GsimR, GsimM, Dstc2];
    let mut out = Vec::new();
    let mut row = |label: &str, namespaces: &[Namespace], agents: &[Agent], acts: &[(&str, Args)], expected: &[(&str, Args)]| {
        for &ns in namespaces {
            for &agent in agents {
                out.push(Fixture {
                    row: format!("{label} [{ns}, {agent}]"),
                    namespace: ns,
                    agent,
                    utterance: String::new(),
                    acts: acts.iter().map(|(n, a)| native(ns, n, a)).collect(),
                    expected: expected.iter().map(|(n, a)| univ(n, a)).collect(),
                });
            }
        }
    };
    let food: Args = &[("food", "thai")];
    let area: Args = &[("area", "north")];
    let two: Args = &[("food", "thai"), ("food", "indian")];

    row("inform(x=y) -> inform(x=y)", &ALL, &[U, S], &[("inform", food)], &[("inform", food)]);
    row("request(x) -> request(x)", &ALL, &[U, S], &[("request", &[("phone", "")])], &[("request", &[("phone", "")])]);
    row("negate(x=y) -> user-negate(x=y)", &ALL, &[U], &[("negate", food)], &[("user-negate", food)]);
    row("negate(x=y) -> sys-negate(x=y)", &ALL, &[S], &[("negate", food)], &[("sys-negate", food)]);
    row("hello() -> user-hi()", &[Dstc2], &[U], &[("hello", &[])], &[("user-hi", &[])]);
    row(
        "greeting(x=y) -> user-hi() + inform(x=y)",
        &GSIM,
        &[U],
        &[("greeting", &[("name", "bob")])],
        &[("user-hi", &[]), ("inform", &[("name", "bob")])],
    );
    row("welcomemsg() -> sys-hi()", &[Dstc2], &[S], &[("welcomemsg", &[])], &[("sys-hi", &[])]);
    row("request_alts() -> reqalts()", &GSIM, &[U], &[("request_alts", &[])], &[("reqalts", &[])]);
    row("reqalts() -> reqalts()", &[Dstc2], &[U], &[("reqalts", &[])], &[("reqalts", &[])]);
    row(
        "request_alts() + inform(x=y) -> reqalts(x=y)",
        &GSIM,
        &[U],
        &[("request_alts", &[]), ("inform", area)],
        &[("reqalts", area)],
    );
    row(
        "reqalts() + inform(x=y) -> reqalts(x=y)",
        &[Dstc2],
        &[U],
        &[("reqalts", &[]), ("inform", area)],
        &[("reqalts", area)],
    );
    row("reqmore() -> reqalts()", &[Dstc2], &[S, U], &[("reqmore", &[])], &[("reqalts", &[])]);
    row("cant_understand() -> repeat()", &GSIM, &[U, S], &[("cant_understand", &[])], &[("repeat", &[])]);
    row("repeat() -> repeat()", &[Dstc2], &[U, S], &[("repeat", &[])], &[("repeat", &[])]);
    row("restart() -> restart()", &[Dstc2], &[U], &[("restart", &[])], &[("restart", &[])]);
    row("affirm() -> affirm()", &ALL, &[U, S], &[("affirm", &[])], &[("affirm", &[])]);
    row(
        "affirm(x=y) -> affirm() + inform(x=y)",
        &GSIM,
        &[U],
        &[("affirm", &[("time", "7pm")])],
        &[("affirm", &[]), ("inform", &[("time", "7pm")])],
    );
    row("impl-conf(x=y) -> sys-impl-confirm(x=y)", &[Dstc2], &[S], &[("impl-conf", food)], &[("sys-impl-confirm", food)]);
    row("confirm(x=y) -> sys-expl-confirm(x=y)", &GSIM, &[S], &[("confirm", food)], &[("sys-expl-confirm", food)]);
    row("expl-conf(x=y) -> sys-expl-confirm(x=y)", &[Dstc2], &[S], &[("expl-conf", food)], &[("sys-expl-confirm", food)]);
    row(
        "confirm-domain(x=y) -> sys-expl-confirm(x=y)",
        &[Dstc2],
        &[S],
        &[("confirm-domain", &[("domain", "restaurant")])],
        &[("sys-expl-confirm", &[("domain", "restaurant")])],
    );
    row("confirm(x=y) -> user-confirm(x=y)", &[Dstc2], &[U], &[("confirm", food)], &[("user-confirm", food)]);
    row("notify_failure() -> sys-notify-failure()", &GSIM, &[S], &[("notify_failure", &[])], &[("sys-notify-failure", &[])]);
    row("canthelp() -> sys-notify-failure()", &[Dstc2], &[S], &[("canthelp", food)], &[("sys-notify-failure", &[])]);
    row(
        "canthelp.exception() -> sys-notify-failure()",
        &[Dstc2],
        &[S],
        &[("canthelp.exception", &[("name", "x")])],
        &[("sys-notify-failure", &[])],
    );
    row("notify_success() -> sys-notify-success()", &GSIM, &[S], &[("notify_success", &[])], &[("sys-notify-success", &[])]);
    row("offer(x=y) -> sys-offer(x=y)", &ALL, &[S], &[("offer", &[("name", "golden wok")])], &[("sys-offer", &[("name", "golden wok")])]);
    row("select(x=y1,y2) -> sys-offer(x=y1,y2)", &ALL, &[S], &[("select", two)], &[("sys-offer", two)]);
    row("thank_you() -> thank-you()", &GSIM, &[U, S], &[("thank_you", &[])], &[("thank-you", &[])]);
    row("thankyou() -> thank-you()", &[Dstc2], &[U], &[("thankyou", &[])], &[("thank-you", &[])]);
    row("bye() -> bye()", &[Dstc2], &[U], &[("bye", &[])], &[("bye", &[])]);
    row("ack() -> ack()", &[Dstc2], &[U], &[("ack", &[])], &[("ack", &[])]);
    row("deny(x=y) -> deny(x=y)", &[Dstc2], &[U], &[("deny", food)], &[("deny", food)]);
    out
}

/// Every native act of the alignment table's left columns with the agents it
/// occurs for.
pub fn documented_inventory() -> Vec<(Namespace, Agent, DialogueAct)> {
    let mut out: Vec<(Namespace, Agent, DialogueAct)> = Vec::new();
    for f in alignment_fixtures() {
        for a in f.acts {
            if !out.iter().any(|(ns, ag, b)| *ns == f.namespace && *ag == f.agent && b == &a) {
                out.push((f.namespace, f.agent, a));
            }
        }
    }
    out
}

/// One fixture per act of every heuristic row, plus the keyword and
/// act-sequence conditions in both polarities.
pub fn heuristic_fixtures() -> Vec<Fixture> {
    let mut out = Vec::new();
    let mut case = |row: String, utterance: &str, acts: &[(&str, Args)], expected: &[&str]| {
        out.push(Fixture {
            row,
            namespace: Namespace::Multiwoz,
            agent: Agent::System,
            utterance: utterance.into(),
            acts: acts.iter().map(|(n, a)| native(Namespace::Multiwoz, n, a)).collect(),
            expected: expected.iter().map(|n| univ(n, &[])).collect(),
        });
    };
    let families: [(&[&str], Args, &str); 5] = [
        (
            &[
                "Booking-Request",
                "Restaurant-Request",
                "Hotel-Request",
                "Attraction-Request",
                "Taxi-Request",
                "Train-Request",
            ],
            &[("day", "?")],
            "request",
        ),
        (&["Train-OfferBook", "Booking-Inform"], &[("people", "2")], "sys-expl-confirm"),
        (
            &[
                "Booking-NoBook",
                "Restaurant-NoOffer",
                "Hotel-NoOffer",
                "Attraction-NoOffer",
                "Train-NoOffer",
            ],
            &[("none", "none")],
            "sys-notify-failure",
        ),
        (&["Booking-Book", "Train-OfferBooked"], &[("ref", "abc123")], "sys-notify-success"),
        (
            &[
                "Restaurant-Recommend",
                "Restaurant-Select",
                "Hotel-Recommend",
                "Hotel-Select",
                "Attraction-Recommend",
                "Attraction-Select",
                "Train-Select",
            ],
            &[("name", "x")],
            "sys-offer",
        ),
    ];
    for (acts, args, output) in families {
        for a in acts {
            case(format!("{a} -> {output}"), "some system text", &[(a, args)], &[output]);
        }
    }
    case("general-reqmore -> reqalts".into(), "anything else?", &[("general-reqmore", &[])], &["reqalts"]);

    let none: Args = &[("none", "none")];
    for a in ["general-greet", "general-bye", "general-welcome"] {
        case(format!("{a} contains '*bye' -> bye"), "Have a nice day. Good bye.", &[(a, none)], &["bye"]);
    }
    case("general-bye without 'bye' -> nothing".into(), "Have a nice day.", &[("general-bye", none)], &[]);
    for a in ["general-greet", "general-welcome"] {
        case(format!("{a} contains '*thank*' -> thank-you"), "Thank you for using our system", &[(a, none)], &["thank-you"]);
    }
    case(
        "general-welcome with 'bye' and 'thank' -> bye + thank-you".into(),
        "Thanks for calling, good bye",
        &[("general-welcome", none)],
        &["bye", "thank-you"],
    );
    case(
        "general-welcome spec example -> bye".into(),
        "You're welcome. Have a nice day. Good bye.",
        &[("general-welcome", none)],
        &["bye"],
    );

    for a in ["Restaurant-Inform", "Hotel-Inform", "Attraction-Inform", "Taxi-Inform", "Train-Inform"] {
        case(
            format!("{a} ends in Booking-Inform(none=none) -> sys-offer"),
            "I found one. Shall I book it?",
            &[(a, &[("name", "x")]), ("Booking-Inform", none)],
            &["sys-offer", "sys-expl-confirm"],
        );
        case(
            format!("{a} not ending in Booking-Inform(none=none) -> inform"),
            "It is on the north side.",
            &[(a, &[("area", "north")])],
            &["inform"],
        );
    }
    case(
        "Inform followed by Booking-Inform with other args -> inform".into(),
        "Booking for 2?",
        &[("Hotel-Inform", &[("name", "x")]), ("Booking-Inform", &[("people", "2")])],
        &["inform", "sys-expl-confirm"],
    );
    case(
        "Booking-Inform(none=none) not last -> inform".into(),
        "Shall I book it? It is cheap.",
        &[("Booking-Inform", none), ("Hotel-Inform", &[("price", "cheap")])],
        &["sys-expl-confirm", "inform"],
    );
    out
}
