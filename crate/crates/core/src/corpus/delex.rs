use super::{tokenize, Turn};

/// Argument values that mark "no value" in native annotations rather than an entity.
const NON_ENTITY_VALUES: [&str; 4] = ["none", "?", "dontcare", "dont care"];

/// Replaces every leftmost-longest match of an act argument value in the
/// turn's tokens with `<slot>`.
pub fn delexicalize(turn: &Turn) -> Vec<String> {
    let values: Vec<(&str, &str)> = turn
        .acts
        .iter()
        .flat_map(|a| a.args.iter())
        .map(|sv| (sv.slot.as_str(), sv.value.as_str()))
        .collect();
    delexicalize_tokens(&turn.tokens, values)
}

/// Slot/value form of [`delexicalize`]. Earlier pairs win ties of equal length.
pub fn delexicalize_tokens<'a>(
    tokens: &[String],
    values: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Vec<String> {
    let mut patterns: Vec<(Vec<String>, String)> = Vec::new();
    for (slot, value) in values {
        let trimmed = value.trim().to_lowercase();
        if NON_ENTITY_VALUES.contains(&trimmed.as_str()) {
            continue;
        }
        let toks = tokenize(&trimmed);
        if toks.is_empty() || toks.iter().any(|t| is_placeholder(t)) {
            continue;
        }
        let placeholder = format!("<{slot}>");
        if !patterns.iter().any(|(p, s)| *p == toks && *s == placeholder) {
            patterns.push((toks, placeholder));
        }
    }
    if patterns.is_empty() {
        return tokens.to_vec();
    }

    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<(usize, &str)> = None;
        for (pat, placeholder) in &patterns {
            let n = pat.len();
            if i + n <= tokens.len()
                && tokens[i..i + n].iter().zip(pat).all(|(a, b)| a.to_lowercase() == *b)
                && best.is_none_or(|(len, _)| n > len)
            {
                best = Some((n, placeholder));
            }
        }
        match best {
            Some((n, placeholder)) => {
                out.push(placeholder.to_string());
                i += n;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

fn is_placeholder(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}
