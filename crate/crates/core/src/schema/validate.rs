use serde::{Deserialize, Serialize};

use super::{act_role, LabelSpace};
use crate::corpus::{Agent, Corpus, Namespace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Not a name of the label space, or not in the universal namespace.
    UnknownAct,
    /// A role-prefixed act on the other agent's turn.
    RoleMismatch { agent: Agent },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub dialogue: String,
    pub turn: usize,
    pub act: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

/// Violations against the twenty-act universal schema.
pub fn validate_universal(corpus: &Corpus) -> Vec<Violation> {
    validate_against(corpus, &LabelSpace::universal())
}

pub fn validate_against(corpus: &Corpus, labels: &LabelSpace) -> Vec<Violation> {
    let mut out = Vec::new();
    for d in &corpus.dialogues {
        for (i, t) in d.turns.iter().enumerate() {
            for a in &t.acts {
                let v = |kind| Violation {
                    dialogue: d.id.clone(),
                    turn: i,
                    act: a.name.clone(),
                    kind,
                };
                if a.namespace != Namespace::Universal || !labels.contains(&a.name) {
                    out.push(v(ViolationKind::UnknownAct));
                } else if act_role(&a.name).is_some_and(|r| r != t.agent) {
                    out.push(v(ViolationKind::RoleMismatch { agent: t.agent }));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dialogue, DialogueAct, Labeling, Split, Turn};

    fn corpus(turns: Vec<Turn>) -> Corpus {
        Corpus::new(Namespace::Universal, Split::Test, Labeling::Both, vec![Dialogue::new("d", turns)])
    }

    #[test]
    fn clean_corpus_has_no_violations() {
        let c = corpus(vec![
            Turn::new(Agent::User, "hi", vec![DialogueAct::universal("user-hi")]),
            Turn::new(Agent::System, "how about x", vec![DialogueAct::universal("sys-offer")]),
        ]);
        assert!(validate_universal(&c).is_empty());
    }

    #[test]
    fn role_and_unknown_violations() {
        let c = corpus(vec![Turn::new(Agent::User, "x", vec![DialogueAct::universal("sys-offer")])]);
        assert_eq!(
            validate_universal(&c),
            vec![Violation {
                dialogue: "d".into(),
                turn: 0,
                act: "sys-offer".into(),
                kind: ViolationKind::RoleMismatch { agent: Agent::User },
            }]
        );
        let c = corpus(vec![Turn::new(Agent::System, "x", vec![DialogueAct::universal("recommend")])]);
        let v = validate_universal(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::UnknownAct);
    }
}
