//! Token-level B/I tagging of zones.

use std::fmt;

use crate::corpus::{CorpusError, Obituary};
use crate::Zone;

pub const TAG_COUNT: usize = 2 * Zone::COUNT;

/// `B-zone` opens a sentence, `I-zone` continues it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IobTag {
    pub inside: bool,
    pub zone: Zone,
}

impl IobTag {
    pub fn begin(zone: Zone) -> Self {
        IobTag { inside: false, zone }
    }

    pub fn inside(zone: Zone) -> Self {
        IobTag { inside: true, zone }
    }

    /// `2 * zone + (1 if inside)`.
    pub fn index(self) -> usize {
        2 * self.zone.index() + usize::from(self.inside)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        let zone = Zone::from_index(index / 2)?;
        Some(IobTag {
            inside: index % 2 == 1,
            zone,
        })
    }
}

impl fmt::Display for IobTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", if self.inside { "I" } else { "B" }, self.zone.code())
    }
}

/// Tags for every token of the document, sentence after sentence.
pub fn to_iob(doc: &Obituary) -> Result<Vec<IobTag>, CorpusError> {
    let unlabeled: Vec<(String, usize)> = doc
        .sentences
        .iter()
        .filter(|s| s.gold.is_none())
        .map(|s| (doc.id.clone(), s.index))
        .collect();
    if !unlabeled.is_empty() {
        return Err(CorpusError::UnlabeledSentences(unlabeled));
    }
    let mut tags = Vec::new();
    for s in &doc.sentences {
        let zone = s.gold.expect("checked above");
        tags.extend((0..s.tokens.len()).map(|i| {
            if i == 0 {
                IobTag::begin(zone)
            } else {
                IobTag::inside(zone)
            }
        }));
    }
    Ok(tags)
}

/// Rewrite every `I-X` that does not follow `B-X` or `I-X` as `B-X`.
pub fn repair(tags: &mut [IobTag]) {
    let mut prev: Option<Zone> = None;
    for tag in tags.iter_mut() {
        if tag.inside && prev != Some(tag.zone) {
            tag.inside = false;
        }
        prev = Some(tag.zone);
    }
}

/// Most frequent zone among the tags, ties to the canonically first zone.
/// `None` only for an empty slice.
pub fn majority_map(tags: &[IobTag]) -> Option<Zone> {
    let mut counts = [0usize; Zone::COUNT];
    for t in tags {
        counts[t.zone.index()] += 1;
    }
    let mut best: Option<(usize, usize)> = None;
    for (z, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
            best = Some((z, c));
        }
    }
    best.and_then(|(z, _)| Zone::from_index(z))
}

/// Map a document's token tags back to one zone per sentence.
pub fn sentence_zones(tags: &[IobTag], lengths: &[usize]) -> Option<Vec<Zone>> {
    if lengths.iter().sum::<usize>() != tags.len() {
        return None;
    }
    let mut at = 0;
    lengths
        .iter()
        .map(|&n| {
            let z = majority_map(&tags[at..at + n]);
            at += n;
            z
        })
        .collect()
}
