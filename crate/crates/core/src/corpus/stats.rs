//! Sentence counts per source and zone.

use std::fmt::Write as _;

use serde::Serialize;

use super::{Corpus, CorpusError};
use crate::zone::Zone;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZoneCount {
    pub zone: Zone,
    pub count: usize,
    /// Integer percentage of the source total, rounded half up.
    pub percent: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceStats {
    pub source: String,
    pub documents: usize,
    pub zones: Vec<ZoneCount>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    /// Sources in order of first appearance in the corpus.
    pub sources: Vec<SourceStats>,
    pub overall: SourceStats,
}

fn percent_half_up(count: usize, total: usize) -> u32 {
    if total == 0 {
        return 0;
    }
    ((200 * count as u64 + total as u64) / (2 * total as u64)) as u32
}

fn source_stats(source: &str, documents: usize, counts: [usize; Zone::COUNT]) -> SourceStats {
    let total = counts.iter().sum();
    SourceStats {
        source: source.to_string(),
        documents,
        zones: Zone::ALL
            .iter()
            .map(|&zone| ZoneCount {
                zone,
                count: counts[zone.index()],
                percent: percent_half_up(counts[zone.index()], total),
            })
            .collect(),
        total,
    }
}

pub fn corpus_stats(corpus: &Corpus) -> Result<StatsReport, CorpusError> {
    corpus.require_labeled()?;
    let mut order: Vec<String> = Vec::new();
    let mut per_source: Vec<(usize, [usize; Zone::COUNT])> = Vec::new();
    let mut overall = [0usize; Zone::COUNT];
    for doc in corpus.obituaries() {
        let slot = match order.iter().position(|s| *s == doc.source) {
            Some(i) => i,
            None => {
                order.push(doc.source.clone());
                per_source.push((0, [0; Zone::COUNT]));
                order.len() - 1
            }
        };
        per_source[slot].0 += 1;
        for s in &doc.sentences {
            let z = s.gold.expect("checked above").index();
            per_source[slot].1[z] += 1;
            overall[z] += 1;
        }
    }
    Ok(StatsReport {
        sources: order
            .iter()
            .zip(&per_source)
            .map(|(s, (docs, counts))| source_stats(s, *docs, *counts))
            .collect(),
        overall: source_stats("All", corpus.len(), overall),
    })
}

impl StatsReport {
    fn columns(&self) -> impl Iterator<Item = &SourceStats> {
        self.sources.iter().chain(std::iter::once(&self.overall))
    }

    /// `source,zone,count,percent` rows, including `All` totals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,zone,count,percent\n");
        for col in self.columns() {
            for zc in &col.zones {
                let _ = writeln!(out, "{},{},{},{}", col.source, zc.zone, zc.count, zc.percent);
            }
            let _ = writeln!(out, "{},All,{},100", col.source, col.total);
        }
        out
    }

    /// Aligned text table: one row per zone, a count and percent column per source.
    pub fn to_table(&self) -> String {
        let headers: Vec<String> = self
            .columns()
            .map(|c| format!("{}: {}", c.source, c.documents))
            .collect();
        let width = headers.iter().map(|h| h.len()).max().unwrap_or(0).max(11);
        let mut out = String::new();
        let _ = write!(out, "{:<6}", "");
        for h in &headers {
            let _ = write!(out, " {h:>width$}");
        }
        out.push('\n');
        let _ = write!(out, "{:<6}", "Class");
        for _ in &headers {
            let _ = write!(out, " {:>width$}", "# sent.    %");
        }
        out.push('\n');
        let rows = Zone::ALL
            .iter()
            .map(|z| z.code().to_string())
            .chain(std::iter::once("All".to_string()));
        for (r, label) in rows.enumerate() {
            let _ = write!(out, "{label:<6}");
            for col in self.columns() {
                let (count, pct) = match col.zones.get(r) {
                    Some(zc) => (zc.count, zc.percent),
                    None => (col.total, 100),
                };
                let cell = format!("{count:>7} {pct:>4}");
                let _ = write!(out, " {cell:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::corpus::Obituary;

    fn doc(id: &str, source: &str, labels: &[Zone]) -> Obituary {
        Obituary::from_sentences(
            id,
            source,
            None,
            labels
                .iter()
                .enumerate()
                .map(|(i, z)| (format!("Sentence {i}."), Some(*z))),
        )
        .unwrap()
    }

    #[test]
    fn two_document_fixture() {
        let corpus = Corpus::new(vec![
            doc("a", "US", &[Zone::PersonalInformation, Zone::FuneralInformation]),
            doc("b", "US", &[Zone::PersonalInformation]),
        ])
        .unwrap();
        let report = corpus_stats(&corpus).unwrap();
        let pi = &report.overall.zones[Zone::PersonalInformation.index()];
        let fi = &report.overall.zones[Zone::FuneralInformation.index()];
        assert_eq!((pi.count, pi.percent), (2, 67));
        assert_eq!((fi.count, fi.percent), (1, 33));
        assert_eq!(report.overall.total, 3);
        assert_eq!(report.sources.len(), 1);
    }

    #[test]
    fn unlabeled_sentence_is_an_error() {
        let d = Obituary::from_sentences("u", "US", None, [("A.", Some(Zone::Other)), ("B.", None)]).unwrap();
        let corpus = Corpus::new(vec![d]).unwrap();
        assert!(matches!(corpus_stats(&corpus), Err(CorpusError::UnlabeledSentences(_))));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent_half_up(1, 8), 13); // 12.5
        assert_eq!(percent_half_up(1058, 11087), 10);
        assert_eq!(percent_half_up(3041, 11087), 27);
        assert_eq!(percent_half_up(11, 11087), 0);
        assert_eq!(percent_half_up(0, 0), 0);
    }

    #[test]
    fn csv_and_table_shapes() {
        let corpus = Corpus::new(vec![
            doc("a", "US", &[Zone::PersonalInformation, Zone::Family]),
            doc("b", "CA", &[Zone::Other]),
        ])
        .unwrap();
        let report = corpus_stats(&corpus).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 3 * 9);
        assert!(csv.contains("US,PI,1,50\n"));
        assert!(csv.contains("All,All,3,100\n"));
        let table = report.to_table();
        assert_eq!(table.lines().count(), 2 + 9);
        assert!(table.contains("US: 1"));
    }

    proptest! {
        #[test]
        fn counts_sum_and_percent_bounds(labels in prop::collection::vec(prop::collection::vec(0usize..8, 1..12), 1..20)) {
            let docs: Vec<Obituary> = labels
                .iter()
                .enumerate()
                .map(|(i, ls)| {
                    let zs: Vec<Zone> = ls.iter().map(|&z| Zone::ALL[z]).collect();
                    doc(&format!("d{i}"), ["US", "CA", "UK"][i % 3], &zs)
                })
                .collect();
            let corpus = Corpus::new(docs).unwrap();
            let report = corpus_stats(&corpus).unwrap();
            prop_assert_eq!(report.overall.total, corpus.sentence_count());
            let counted: usize = report.sources.iter().map(|s| s.total).sum();
            prop_assert_eq!(counted, corpus.sentence_count());
            for col in report.sources.iter().chain(std::iter::once(&report.overall)) {
                let zone_sum: usize = col.zones.iter().map(|z| z.count).sum();
                prop_assert_eq!(zone_sum, col.total);
                // Eight half-up roundings can drift by at most four points in total.
                let pct: i64 = col.zones.iter().map(|z| z.percent as i64).sum();
                prop_assert!((pct - 100).abs() <= 4, "percent sum {}", pct);
            }
        }
    }
}
