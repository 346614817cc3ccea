use proptest::prelude::*;
use zoner_core::corpus::{build_vocabulary, segment_sentences, tokenize, Corpus, Obituary, UNK_INDEX};

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Za-z]{1,8}",
        "[0-9]{1,4}",
        Just("Mr.".to_string()),
        Just("Nov.".to_string()),
        Just("J.".to_string()),
        Just("St.".to_string()),
        Just("p.m.".to_string()),
        Just("\"Bud\"".to_string()),
        Just("(Smith)".to_string()),
    ]
}

fn ending() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just(""), Just("."), Just("?"), Just("!"), Just(","), Just(".\"")]
}

fn text() -> impl Strategy<Value = String> {
    let sentence = (prop::collection::vec(word(), 1..8), ending()).prop_map(|(w, e)| format!("{}{e}", w.join(" ")));
    (
        prop::collection::vec(sentence, 1..6),
        prop::collection::vec(prop_oneof![Just(" "), Just("  "), Just("\n"), Just(" \t ")], 6),
    )
        .prop_map(|(s, seps)| {
            let mut out = String::new();
            for (i, part) in s.iter().enumerate() {
                if i > 0 {
                    out.push_str(seps[i % seps.len()]);
                }
                out.push_str(part);
            }
            out
        })
}

fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn resegmenting_joined_segments_is_idempotent(raw in text()) {
        let first = segment_sentences(&raw).unwrap();
        let again = segment_sentences(&first.join(" ")).unwrap();
        prop_assert_eq!(first, again);
    }

    #[test]
    fn segments_cover_all_content(raw in text()) {
        let parts = segment_sentences(&raw).unwrap();
        prop_assert!(parts.iter().all(|p| !p.is_empty() && p.trim() == p));
        prop_assert_eq!(squeeze(&parts.concat()), squeeze(&raw));
    }

    #[test]
    fn tokenize_ignores_case(s in "[ -~]{0,60}") {
        prop_assert_eq!(tokenize(&s.to_lowercase()), tokenize(&s));
    }

    #[test]
    fn tokens_carry_no_whitespace(s in "\\PC{0,60}") {
        for t in tokenize(&s) {
            prop_assert!(!t.is_empty() && !t.chars().any(char::is_whitespace));
        }
    }

    #[test]
    fn vocabulary_indices_round_trip(docs in prop::collection::vec(prop::collection::vec("[a-e]{1,3}", 1..12), 1..6), min_freq in 1usize..3) {
        let obits: Vec<Obituary> = docs
            .iter()
            .enumerate()
            .map(|(i, words)| Obituary::from_sentences(format!("d{i}"), "US", None, [(words.join(" "), None)]).unwrap())
            .collect();
        let corpus = Corpus::new(obits).unwrap();
        let ids: Vec<String> = corpus.ids().into_iter().map(String::from).collect();
        let Ok(vocab) = build_vocabulary(&corpus, &ids, min_freq, 1000) else { return Ok(()); };
        for i in 2..vocab.len() {
            let token = vocab.token_of(i).unwrap();
            prop_assert_eq!(vocab.index_of(token), i);
        }
        prop_assert_eq!(vocab.index_of("zzz-not-present"), UNK_INDEX);
    }
}

#[test]
fn abbreviation_does_not_split_a_sentence() {
    let text = "John Doe, 64, of Newport, found eternal rest on Nov. 22, 2018.";
    assert_eq!(segment_sentences(text).unwrap(), vec![text.to_string()]);
}

#[test]
fn tokenizer_examples() {
    assert_eq!(
        tokenize("John loved golf, hockey."),
        ["john", "loved", "golf", ",", "hockey", "."]
    );
    assert_eq!(tokenize("passed away in 2001"), ["passed", "away", "in", "2001"]);
    assert!(tokenize("").is_empty());
}
