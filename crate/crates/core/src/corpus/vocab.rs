//! Token vocabulary built from training documents only.

use std::collections::HashMap;

use super::{Corpus, CorpusError};

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Build from non-reserved tokens; they receive indices 2, 3, ... in order.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens.into_iter().map(Into::into));
        let index = all.iter().enumerate().skip(2).map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens: all, index }
    }

    /// Size including the two reserved entries.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token_of(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// Non-reserved tokens in index order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens[2..]
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_of(t.as_ref())).collect()
    }
}

/// Count tokens over the documents `ids`, keep those with frequency at least
/// `min_freq`, most frequent first (ties lexicographic), at most `max_size`.
pub fn build_vocabulary<S: AsRef<str>>(
    corpus: &Corpus,
    ids: &[S],
    min_freq: usize,
    max_size: usize,
) -> Result<Vocabulary, CorpusError> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for id in ids {
        let doc = corpus
            .get(id.as_ref())
            .ok_or_else(|| CorpusError::UnknownDocument(id.as_ref().to_string()))?;
        for s in &doc.sentences {
            for t in &s.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_freq.max(1)).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    kept.truncate(max_size);
    if kept.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    Ok(Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t)))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::corpus::Obituary;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Obituary::from_sentences(format!("d{i}"), "US", None, [(*t, None)]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn min_freq_filters() {
        let c = corpus(&["a a a b"]);
        let v = build_vocabulary(&c, &["d0"], 2, 100).unwrap();
        assert_eq!(v.tokens(), &["a".to_string()]);
        assert_eq!(v.index_of("a"), 2);
        assert_eq!(v.index_of("b"), UNK_INDEX);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn truncation_keeps_most_frequent() {
        let c = corpus(&["x y y z z z"]);
        let v = build_vocabulary(&c, &["d0"], 1, 1).unwrap();
        assert_eq!(v.tokens(), &["z".to_string()]);
    }

    #[test]
    fn ties_are_lexicographic_and_deterministic() {
        let c = corpus(&["d c b a", "a b"]);
        let v1 = build_vocabulary(&c, &["d0", "d1"], 1, 10).unwrap();
        let v2 = build_vocabulary(&c, &["d0", "d1"], 1, 10).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v1.tokens(), &["a", "b", "c", "d"]);
    }

    #[test]
    fn only_training_ids_contribute() {
        let c = corpus(&["train words", "secret"]);
        let v = build_vocabulary(&c, &["d0"], 1, 10).unwrap();
        assert!(!v.contains("secret"));
    }

    #[test]
    fn empty_vocabulary() {
        let c = corpus(&["once"]);
        assert!(matches!(
            build_vocabulary(&c, &["d0"], 2, 10),
            Err(CorpusError::EmptyVocabulary)
        ));
    }

    proptest! {
        #[test]
        fn index_round_trip(words in prop::collection::vec("[a-z]{1,6}", 1..60)) {
            let text = words.join(" ");
            let c = corpus(&[&text]);
            let v = build_vocabulary(&c, &["d0"], 1, 1000).unwrap();
            for i in 2..v.len() {
                prop_assert_eq!(v.index_of(v.token_of(i).unwrap()), i);
            }
        }
    }
}
