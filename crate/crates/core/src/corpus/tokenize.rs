//! Lower-casing, punctuation-splitting tokenizer.

/// Bumped whenever tokenization output can change for some input.
pub const TOKENIZER_VERSION: &str = "tok-v1";

/// Tokenize a sentence: lower-case, split on whitespace, and emit every
/// character that is neither alphanumeric nor whitespace as its own token.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in sentence.chars() {
        if c.is_whitespace() {
            flush(&mut tokens, &mut current);
        } else if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else {
            flush(&mut tokens, &mut current);
            tokens.push(c.to_lowercase().collect());
        }
    }
    flush(&mut tokens, &mut current);
    tokens
}

fn flush(tokens: &mut Vec<String>, current: &mut String) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}
