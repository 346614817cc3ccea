//! Rule-based sentence segmentation.
//!
//! A sentence ends at `.`, `?` or `!` (optionally followed by more terminals
//! and closing quotes or brackets) when the terminal is followed by whitespace
//! and the next non-space character is an upper-case letter, a digit or a
//! quote (an opening quote or bracket may precede the letter or digit). A
//! period does not end a sentence after an abbreviation from the shipped list
//! or after an initial such as the `J.` in "J. Doe".

use std::collections::HashSet;
use std::sync::LazyLock;

use super::CorpusError;

/// Bumped whenever segmentation output can change for some input.
pub const SEGMENTER_VERSION: &str = "seg-v1";

const ABBREVIATION_DATA: &str = include_str!("../../data/abbreviations-v1.txt");

static ABBREVIATIONS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    ABBREVIATION_DATA
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201D}' | '\u{2019}' | ')' | ']')
}

fn is_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201C}' | '\u{201D}' | '\u{2018}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    is_quote(c) || matches!(c, '(' | '[')
}

/// The abbreviation list shipped with this segmenter version.
pub fn abbreviations() -> impl Iterator<Item = &'static str> {
    let mut all: Vec<_> = ABBREVIATIONS.iter().copied().collect();
    all.sort_unstable();
    all.into_iter()
}

/// True for "J", "J.R", "A.B.C": dotted single upper-case letters.
fn is_initials(word: &str) -> bool {
    let mut expect_letter = true;
    for c in word.chars() {
        if expect_letter {
            if !c.is_uppercase() {
                return false;
            }
        } else if c != '.' {
            return false;
        }
        expect_letter = !expect_letter;
    }
    !expect_letter
}

/// Whether the period at byte `dot` of `text` belongs to an abbreviation or initial.
fn period_is_suppressed(text: &str, dot: usize) -> bool {
    let before = &text[..dot];
    let start = before
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let word = before[start..].trim_start_matches(is_opener);
    if word.is_empty() {
        return false;
    }
    ABBREVIATIONS.contains(word) || is_initials(word)
}

/// Split `raw_text` into trimmed sentence strings.
pub fn segment_sentences(raw_text: &str) -> Result<Vec<String>, CorpusError> {
    if raw_text.trim().is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    let chars: Vec<(usize, char)> = raw_text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        // Consume the whole terminal run plus trailing closers.
        let mut j = i + 1;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        let single_period = c == '.' && j == i + 1;
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map(|&(p, _)| p).unwrap_or(raw_text.len());
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let had_space = k > j;
        let starts_sentence = match chars.get(k).map(|&(_, c)| c) {
            Some(c) if c.is_uppercase() || c.is_ascii_digit() || is_quote(c) => true,
            Some(c) if is_opener(c) => chars
                .get(k + 1)
                .is_some_and(|&(_, n)| n.is_uppercase() || n.is_ascii_digit()),
            _ => false,
        };
        if had_space && starts_sentence && !(single_period && period_is_suppressed(raw_text, pos)) {
            push_trimmed(&mut sentences, &raw_text[start..end]);
            start = end;
            i = k;
        } else {
            i = j.max(i + 1);
        }
    }
    push_trimmed(&mut sentences, &raw_text[start..]);
    Ok(sentences)
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}
