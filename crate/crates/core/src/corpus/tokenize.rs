/// Identifier of the tokenizer, recorded in every canonical file header.
pub const TOKENIZER_ID: &str = "lower-ws-trailpunct-v1";

const TRAILING: [char; 4] = ['.', ',', '?', '!'];

/// Lowercases, splits on whitespace, then peels trailing `. , ? !` off each
/// chunk as separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let core = lower.trim_end_matches(TRAILING);
        if !core.is_empty() {
            out.push(core.to_string());
        }
        out.extend(lower[core.len()..].chars().map(String::from));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctuation_is_split_off_the_end_only() {
        assert_eq!(tokenize("You're welcome. Good bye!"), vec!["you're", "welcome", ".", "good", "bye", "!"]);
        assert_eq!(tokenize("a.m. ok?!"), vec!["a.m", ".", "ok", "?", "!"]);
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
    }

    #[test]
    fn blank_input_has_no_tokens() {
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn lowercases_unicode() {
        assert_eq!(tokenize("CAFÉ Rouge"), vec!["café", "rouge"]);
    }
}
