//! A constructed, linearly separable corpus: every zone owns one marker
//! token that appears in each of its sentences and nowhere else.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Obituary};
use crate::Zone;

const FILLERS: [&str; 8] = ["the", "a", "of", "and", "was", "with", "his", "her"];

/// Marker token of `zone`.
pub fn marker(zone: Zone) -> String {
    format!("mk{}", zone.code().to_lowercase())
}

/// `sentences` labeled sentences with zones balanced as evenly as possible,
/// grouped into documents of `per_document` sentences (the last may be
/// shorter). Each sentence holds its zone's marker at a random position
/// among `fillers` words drawn from a shared eight-word filler list.
pub fn marker_corpus(sentences: usize, per_document: usize, fillers: RangeInclusive<usize>, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zones: Vec<Zone> = (0..sentences).map(|i| Zone::ALL[i % Zone::COUNT]).collect();
    zones.shuffle(&mut rng);
    let mut docs = Vec::new();
    for (d, chunk) in zones.chunks(per_document.max(1)).enumerate() {
        let sents: Vec<(String, Option<Zone>)> = chunk
            .iter()
            .map(|&z| {
                let n = rng.random_range(fillers.clone());
                let mut words: Vec<String> = (0..n)
                    .map(|_| FILLERS[rng.random_range(0..FILLERS.len())].to_string())
                    .collect();
                let at = rng.random_range(0..=n);
                words.insert(at, marker(z));
                let mut text = words.join(" ");
                text.push('.');
                (text, Some(z))
            })
            .collect();
        let source = ["US", "CA", "UK"][d % 3];
        docs.push(Obituary::from_sentences(format!("toy-{d:03}"), source, None, sents).expect("non-empty sentences"));
    }
    Corpus::new(docs).expect("unique ids")
}
