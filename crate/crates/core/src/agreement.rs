//! Inter-annotator agreement: Cohen's and Fleiss' kappa.
//!
//! Per-class agreement binarizes the item-by-category matrix into
//! `{zone, not zone}` and applies Fleiss' kappa to the two-column result.
//! Fleiss' kappa only sees items labeled by every annotator in the set;
//! pairwise Cohen's kappa uses each pair's shared items.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::zone::Zone;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid annotation matrix: {0}")]
    Matrix(String),
    #[error("fewer than two annotators share any item")]
    InsufficientOverlap,
}

/// One label given by one annotator to one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub doc_id: String,
    pub sentence_idx: usize,
    pub annotator: String,
    pub label: Zone,
    pub rev: u64,
    pub ts: DateTime<Utc>,
}

pub type ItemKey = (String, usize);

/// Keep only the highest revision per (doc, sentence, annotator).
pub fn latest_records<'a, I>(records: I) -> BTreeMap<(String, usize, String), &'a AnnotationRecord>
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let mut live: BTreeMap<(String, usize, String), &AnnotationRecord> = BTreeMap::new();
    for r in records {
        let key = (r.doc_id.clone(), r.sentence_idx, r.annotator.clone());
        match live.get(&key) {
            Some(prev) if prev.rev >= r.rev => {}
            _ => {
                live.insert(key, r);
            }
        }
    }
    live
}

/// Item by category counts with a constant number of raters per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationMatrix {
    items: Vec<ItemKey>,
    counts: Vec<Vec<u32>>,
    categories: usize,
    raters: u32,
}

impl AnnotationMatrix {
    pub fn new(items: Vec<ItemKey>, counts: Vec<Vec<u32>>) -> Result<Self, AgreementError> {
        if items.len() != counts.len() {
            return Err(AgreementError::Matrix(format!(
                "{} items but {} count rows",
                items.len(),
                counts.len()
            )));
        }
        let categories = counts.first().map(Vec::len).unwrap_or(Zone::COUNT);
        if counts.iter().any(|r| r.len() != categories) {
            return Err(AgreementError::Matrix("rows have different widths".into()));
        }
        let raters = counts.first().map(|r| r.iter().sum()).unwrap_or(0);
        if let Some(i) = counts.iter().position(|r| r.iter().sum::<u32>() != raters) {
            return Err(AgreementError::Matrix(format!(
                "row {i} sums to {} but row 0 sums to {raters}",
                counts[i].iter().sum::<u32>()
            )));
        }
        Ok(AnnotationMatrix {
            items,
            counts,
            categories,
            raters,
        })
    }

    /// Anonymous items, for fixtures and tests.
    pub fn from_counts(counts: Vec<Vec<u32>>) -> Result<Self, AgreementError> {
        let items = (0..counts.len()).map(|i| (String::new(), i)).collect();
        AnnotationMatrix::new(items, counts)
    }

    /// Build the zone matrix over items labeled by every annotator in
    /// `annotators` (all annotators present in `records` when `None`).
    pub fn from_records(records: &[AnnotationRecord], annotators: Option<&[String]>) -> Result<Self, AgreementError> {
        let live = latest_records(records);
        let wanted: BTreeSet<&str> = match annotators {
            Some(list) => list.iter().map(String::as_str).collect(),
            None => live.keys().map(|(_, _, a)| a.as_str()).collect(),
        };
        let mut per_item: BTreeMap<ItemKey, Vec<Zone>> = BTreeMap::new();
        for ((doc, idx, annotator), r) in &live {
            if wanted.contains(annotator.as_str()) {
                per_item.entry((doc.clone(), *idx)).or_default().push(r.label);
            }
        }
        let mut items = Vec::new();
        let mut counts = Vec::new();
        for (item, labels) in per_item {
            if labels.len() == wanted.len() {
                let mut row = vec![0u32; Zone::COUNT];
                for z in labels {
                    row[z.index()] += 1;
                }
                items.push(item);
                counts.push(row);
            }
        }
        AnnotationMatrix::new(items, counts)
    }

    pub fn items(&self) -> &[ItemKey] {
        &self.items
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Rows whose item satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&ItemKey) -> bool) -> AnnotationMatrix {
        let (items, counts) = self
            .items
            .iter()
            .zip(&self.counts)
            .filter(|(item, _)| keep(item))
            .map(|(i, c)| (i.clone(), c.clone()))
            .unzip();
        AnnotationMatrix {
            items,
            counts,
            categories: self.categories,
            raters: self.raters,
        }
    }

    /// Two columns: raters choosing `category`, raters choosing anything else.
    pub fn binarize(&self, category: usize) -> AnnotationMatrix {
        AnnotationMatrix {
            items: self.items.clone(),
            counts: self
                .counts
                .iter()
                .map(|r| {
                    let hit = r.get(category).copied().unwrap_or(0);
                    vec![hit, self.raters - hit]
                })
                .collect(),
            categories: 2,
            raters: self.raters,
        }
    }
}

const DEGENERATE: f64 = 1e-12;

/// Cohen's kappa for two aligned label sequences.
pub fn cohen_kappa(labels_a: &[Zone], labels_b: &[Zone]) -> Result<f64, AgreementError> {
    if labels_a.is_empty() || labels_a.len() != labels_b.len() {
        return Err(AgreementError::Input(format!(
            "label sequences must be non-empty and of equal length ({} vs {})",
            labels_a.len(),
            labels_b.len()
        )));
    }
    let n = labels_a.len() as f64;
    let mut marg_a = [0usize; Zone::COUNT];
    let mut marg_b = [0usize; Zone::COUNT];
    let mut agree = 0usize;
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        marg_a[a.index()] += 1;
        marg_b[b.index()] += 1;
        agree += usize::from(a == b);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = marg_a
        .iter()
        .zip(&marg_b)
        .map(|(&a, &b)| (a as f64 / n) * (b as f64 / n))
        .sum();
    if 1.0 - p_e < DEGENERATE {
        // Both annotators used one and the same label throughout.
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

fn fleiss_checked(matrix: &AnnotationMatrix) -> Result<Option<f64>, AgreementError> {
    if matrix.len() < 2 {
        return Err(AgreementError::Input(format!(
            "need at least 2 items, got {}",
            matrix.len()
        )));
    }
    if matrix.raters < 2 {
        return Err(AgreementError::Input(format!(
            "need at least 2 raters per item, got {}",
            matrix.raters
        )));
    }
    let n = matrix.raters as f64;
    let items = matrix.len() as f64;
    let mut totals = vec![0u64; matrix.categories];
    let mut p_bar = 0.0;
    for row in &matrix.counts {
        let sq: f64 = row.iter().map(|&c| (c as f64) * (c as f64)).sum();
        p_bar += (sq - n) / (n * (n - 1.0));
        for (t, &c) in totals.iter_mut().zip(row) {
            *t += c as u64;
        }
    }
    p_bar /= items;
    let p_e: f64 = totals
        .iter()
        .map(|&t| {
            let p = t as f64 / (items * n);
            p * p
        })
        .sum();
    if 1.0 - p_e < DEGENERATE {
        return Ok(if (1.0 - p_bar).abs() < DEGENERATE {
            Some(1.0)
        } else {
            None
        });
    }
    Ok(Some((p_bar - p_e) / (1.0 - p_e)))
}

/// Fleiss' kappa. A matrix whose chance agreement is 1 (one category used
/// throughout) has perfect agreement and scores 1.0.
pub fn fleiss_kappa(matrix: &AnnotationMatrix) -> Result<f64, AgreementError> {
    fleiss_checked(matrix)?.ok_or_else(|| AgreementError::Matrix("kappa is undefined".into()))
}

/// One-vs-rest Fleiss' kappa for `zone`. `None` when nobody used the zone.
pub fn kappa_by_class(matrix: &AnnotationMatrix, zone: Zone) -> Result<Option<f64>, AgreementError> {
    let used = matrix
        .counts
        .iter()
        .any(|r| r.get(zone.index()).is_some_and(|&c| c > 0));
    if !used {
        // Still validate the matrix shape so callers see input errors.
        fleiss_checked(matrix)?;
        return Ok(None);
    }
    fleiss_checked(&matrix.binarize(zone.index()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseKappa {
    pub annotator_a: String,
    pub annotator_b: String,
    pub items: usize,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassKappa {
    pub zone: Zone,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAgreement {
    pub group: String,
    pub items: usize,
    pub fleiss: Option<f64>,
    pub per_class: Vec<ClassKappa>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub annotators: Vec<String>,
    pub overall: GroupAgreement,
    pub pairwise: Vec<PairwiseKappa>,
    pub per_source: Vec<GroupAgreement>,
}

fn group_agreement(group: &str, matrix: &AnnotationMatrix) -> GroupAgreement {
    let usable = matrix.len() >= 2 && matrix.raters() >= 2;
    GroupAgreement {
        group: group.to_string(),
        items: matrix.len(),
        fleiss: if usable {
            fleiss_checked(matrix).ok().flatten()
        } else {
            None
        },
        per_class: Zone::ALL
            .iter()
            .map(|&zone| ClassKappa {
                zone,
                kappa: if usable {
                    kappa_by_class(matrix, zone).ok().flatten()
                } else {
                    None
                },
            })
            .collect(),
    }
}

/// Pairwise Cohen's kappa over each pair's shared items, for the given
/// annotators (all annotators when `None`).
pub fn pairwise_kappas(records: &[AnnotationRecord], annotators: Option<&[String]>) -> Vec<PairwiseKappa> {
    let live = latest_records(records);
    let mut by_annotator: BTreeMap<&str, HashMap<ItemKey, Zone>> = BTreeMap::new();
    for ((doc, idx, annotator), r) in &live {
        if annotators.is_none_or(|list| list.iter().any(|a| a == annotator)) {
            by_annotator
                .entry(annotator.as_str())
                .or_default()
                .insert((doc.clone(), *idx), r.label);
        }
    }
    let names: Vec<&str> = by_annotator.keys().copied().collect();
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let la = &by_annotator[a];
            let lb = &by_annotator[b];
            let mut shared: Vec<(&ItemKey, Zone)> = la
                .iter()
                .filter(|(k, _)| lb.contains_key(*k))
                .map(|(k, z)| (k, *z))
                .collect();
            shared.sort_by(|x, y| x.0.cmp(y.0));
            let xs: Vec<Zone> = shared.iter().map(|(_, z)| *z).collect();
            let ys: Vec<Zone> = shared.iter().map(|(k, _)| lb[*k]).collect();
            out.push(PairwiseKappa {
                annotator_a: a.to_string(),
                annotator_b: b.to_string(),
                items: xs.len(),
                kappa: cohen_kappa(&xs, &ys).ok(),
            });
        }
    }
    out
}

/// Overall, pairwise, per-class and per-source agreement. Items are grouped
/// by the source of their document in `corpus`; documents missing from the
/// corpus fall into the group `"unknown"`.
pub fn agreement_report(
    records: &[AnnotationRecord],
    corpus: Option<&Corpus>,
) -> Result<AgreementReport, AgreementError> {
    let pairwise = pairwise_kappas(records, None);
    if !pairwise.iter().any(|p| p.items > 0) {
        return Err(AgreementError::InsufficientOverlap);
    }
    let matrix = AnnotationMatrix::from_records(records, None)?;
    let annotators: Vec<String> = latest_records(records)
        .keys()
        .map(|(_, _, a)| a.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let source_of = |doc: &str| -> String {
        corpus
            .and_then(|c| c.get(doc))
            .map(|o| o.source.clone())
            .unwrap_or_else(|| "unknown".to_string())
    };
    let mut sources: Vec<String> = Vec::new();
    for (doc, _) in matrix.items() {
        let s = source_of(doc);
        if !sources.contains(&s) {
            sources.push(s);
        }
    }
    if let Some(c) = corpus {
        // Corpus order when available, so columns read like the corpus statistics.
        let order: Vec<&str> = c.obituaries().iter().map(|o| o.source.as_str()).collect();
        sources.sort_by_key(|s| order.iter().position(|o| o == s).unwrap_or(usize::MAX));
    }
    let per_source = sources
        .iter()
        .map(|s| group_agreement(s, &matrix.filter(|(doc, _)| source_of(doc) == *s)))
        .collect();

    Ok(AgreementReport {
        annotators,
        overall: group_agreement("All", &matrix),
        pairwise,
        per_source,
    })
}

fn fmt_kappa(k: Option<f64>) -> String {
    k.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".to_string())
}

impl AgreementReport {
    fn groups(&self) -> impl Iterator<Item = &GroupAgreement> {
        self.per_source.iter().chain(std::iter::once(&self.overall))
    }

    /// Classes as rows, sources plus `All` as columns, then pairwise kappas.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "| Class |");
        for g in self.groups() {
            let _ = write!(out, " {} |", g.group);
        }
        out.push('\n');
        let _ = write!(out, "|---|");
        for _ in self.groups() {
            out.push_str("---:|");
        }
        out.push('\n');
        for zone in Zone::ALL {
            let _ = write!(out, "| {zone} |");
            for g in self.groups() {
                let _ = write!(out, " {} |", fmt_kappa(g.per_class[zone.index()].kappa));
            }
            out.push('\n');
        }
        let _ = write!(out, "| All |");
        for g in self.groups() {
            let _ = write!(out, " {} |", fmt_kappa(g.fleiss));
        }
        out.push('\n');
        let _ = write!(out, "| Items |");
        for g in self.groups() {
            let _ = write!(out, " {} |", g.items);
        }
        out.push_str("\n\n| Annotators | Items | Cohen's kappa |\n|---|---:|---:|\n");
        for p in &self.pairwise {
            let _ = writeln!(
                out,
                "| {} / {} | {} | {} |",
                p.annotator_a,
                p.annotator_b,
                p.items,
                fmt_kappa(p.kappa)
            );
        }
        out
    }

    /// `kind,group,class,items,kappa`; undefined values are left empty.
    pub fn to_csv(&self) -> String {
        let val = |k: Option<f64>| k.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from("kind,group,class,items,kappa\n");
        for g in self.groups() {
            for c in &g.per_class {
                let _ = writeln!(out, "fleiss,{},{},{},{}", g.group, c.zone, g.items, val(c.kappa));
            }
            let _ = writeln!(out, "fleiss,{},All,{},{}", g.group, g.items, val(g.fleiss));
        }
        for p in &self.pairwise {
            let _ = writeln!(
                out,
                "cohen,{}|{},All,{},{}",
                p.annotator_a,
                p.annotator_b,
                p.items,
                val(p.kappa)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use Zone::*;

    use super::*;

    fn rec(doc: &str, idx: usize, annotator: &str, label: Zone, rev: u64) -> AnnotationRecord {
        AnnotationRecord {
            doc_id: doc.into(),
            sentence_idx: idx,
            annotator: annotator.into(),
            label,
            rev,
            ts: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
        }
    }

    /// Direct Fleiss formula written out longhand, independent of `fleiss_checked`.
    fn fleiss_oracle(rows: &[Vec<u32>]) -> f64 {
        let n: f64 = rows[0].iter().sum::<u32>() as f64;
        let big_n = rows.len() as f64;
        let k = rows[0].len();
        let mut p_i = Vec::new();
        for r in rows {
            let mut s = 0.0;
            for &c in r {
                s += c as f64 * (c as f64 - 1.0);
            }
            p_i.push(s / (n * (n - 1.0)));
        }
        let p_bar = p_i.iter().sum::<f64>() / big_n;
        let mut p_e = 0.0;
        for j in 0..k {
            let pj = rows.iter().map(|r| r[j] as f64).sum::<f64>() / (big_n * n);
            p_e += pj * pj;
        }
        (p_bar - p_e) / (1.0 - p_e)
    }

    #[test]
    fn cohen_perfect() {
        assert_eq!(
            cohen_kappa(
                &[PersonalInformation, BiographicalSketch, Family],
                &[PersonalInformation, BiographicalSketch, Family]
            )
            .unwrap(),
            1.0
        );
    }

    #[test]
    fn cohen_independence_fixture() {
        let a = [
            PersonalInformation,
            PersonalInformation,
            BiographicalSketch,
            BiographicalSketch,
        ];
        let b = [
            PersonalInformation,
            BiographicalSketch,
            PersonalInformation,
            BiographicalSketch,
        ];
        assert_eq!(cohen_kappa(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cohen_disjoint_marginals() {
        let k = cohen_kappa(&[PersonalInformation; 2], &[BiographicalSketch; 2]).unwrap();
        assert_eq!(k, 0.0);
    }

    #[test]
    fn cohen_degenerate_and_errors() {
        assert_eq!(cohen_kappa(&[Other; 4], &[Other; 4]).unwrap(), 1.0);
        assert!(matches!(cohen_kappa(&[], &[]), Err(AgreementError::Input(_))));
        assert!(matches!(
            cohen_kappa(&[Other], &[Other, Other]),
            Err(AgreementError::Input(_))
        ));
    }

    #[test]
    fn fleiss_unanimous_three_raters() {
        let m = AnnotationMatrix::from_counts(vec![
            vec![3, 0, 0, 0, 0, 0, 0, 0],
            vec![0, 3, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 3, 0],
        ])
        .unwrap();
        assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
    }

    #[test]
    fn fleiss_two_item_fixture() {
        let m =
            AnnotationMatrix::from_counts(vec![vec![2, 0, 0, 0, 0, 0, 0, 0], vec![1, 1, 0, 0, 0, 0, 0, 0]]).unwrap();
        let k = fleiss_kappa(&m).unwrap();
        assert!((k - (-1.0 / 3.0)).abs() < 1e-12, "{k}");
        let b = kappa_by_class(&m, PersonalInformation).unwrap().unwrap();
        assert_eq!(m.binarize(0).counts(), &[vec![2, 0], vec![1, 1]]);
        assert!((b - (-1.0 / 3.0)).abs() < 1e-12, "{b}");
    }

    #[test]
    fn fleiss_single_category_is_one() {
        let m = AnnotationMatrix::from_counts(vec![vec![0, 0, 4, 0, 0, 0, 0, 0]; 5]).unwrap();
        assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
        assert_eq!(kappa_by_class(&m, Family).unwrap(), Some(1.0));
        assert_eq!(kappa_by_class(&m, Tribute).unwrap(), None);
    }

    #[test]
    fn fleiss_rejects_bad_matrices() {
        assert!(matches!(
            AnnotationMatrix::from_counts(vec![vec![2, 0], vec![1, 0]]),
            Err(AgreementError::Matrix(_))
        ));
        let one_item = AnnotationMatrix::from_counts(vec![vec![2, 0]]).unwrap();
        assert!(matches!(fleiss_kappa(&one_item), Err(AgreementError::Input(_))));
        let one_rater = AnnotationMatrix::from_counts(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert!(matches!(fleiss_kappa(&one_rater), Err(AgreementError::Input(_))));
    }

    #[test]
    fn latest_revision_wins() {
        let records = vec![
            rec("d", 0, "a", Other, 1),
            rec("d", 0, "a", Family, 3),
            rec("d", 0, "a", Tribute, 2),
        ];
        let live = latest_records(&records);
        assert_eq!(live.len(), 1);
        assert_eq!(live.values().next().unwrap().label, Family);
    }

    #[test]
    fn matrix_keeps_only_fully_annotated_items() {
        let records = vec![
            rec("d", 0, "a", Other, 1),
            rec("d", 0, "b", Other, 1),
            rec("d", 1, "a", Family, 1),
        ];
        let m = AnnotationMatrix::from_records(&records, None).unwrap();
        assert_eq!(m.items(), &[("d".to_string(), 0)]);
        assert_eq!(m.raters(), 2);
    }

    #[test]
    fn report_perfect_agreement() {
        let zones = [
            PersonalInformation,
            BiographicalSketch,
            Family,
            Family,
            FuneralInformation,
            FuneralInformation,
            Other,
            Characteristics,
            Gratitude,
            PersonalInformation,
        ];
        let mut records = Vec::new();
        for (i, z) in zones.iter().enumerate() {
            records.push(rec("d", i, "a", *z, 1));
            records.push(rec("d", i, "b", *z, 1));
        }
        let report = agreement_report(&records, None).unwrap();
        assert_eq!(report.overall.fleiss, Some(1.0));
        assert_eq!(report.pairwise.len(), 1);
        assert_eq!(report.pairwise[0].kappa, Some(1.0));
        assert_eq!(report.pairwise[0].items, 10);
        assert_eq!(report.overall.per_class[Tribute.index()].kappa, None);
        assert_eq!(report.overall.per_class[Family.index()].kappa, Some(1.0));
        assert!(report.to_markdown().contains("| T | n/a | n/a |"));
    }

    #[test]
    fn report_three_annotators_matches_oracle() {
        // Item rows (PI, BS, FA, O) for raters a, b, c.
        let labels = [
            [PersonalInformation, PersonalInformation, PersonalInformation],
            [PersonalInformation, BiographicalSketch, PersonalInformation],
            [BiographicalSketch, BiographicalSketch, BiographicalSketch],
            [Family, Family, Other],
            [Other, Other, Other],
            [Family, BiographicalSketch, Family],
        ];
        let mut records = Vec::new();
        let mut rows = Vec::new();
        for (i, item) in labels.iter().enumerate() {
            let mut row = vec![0u32; 8];
            for (annotator, z) in ["a", "b", "c"].iter().zip(item) {
                records.push(rec("doc", i, annotator, *z, 1));
                row[z.index()] += 1;
            }
            rows.push(row);
        }
        let report = agreement_report(&records, None).unwrap();
        let expected = fleiss_oracle(&rows);
        assert!((report.overall.fleiss.unwrap() - expected).abs() < 1e-12);
        let bin: Vec<Vec<u32>> = rows.iter().map(|r| vec![r[2], 3 - r[2]]).collect();
        let fa = report.overall.per_class[Family.index()].kappa.unwrap();
        assert!((fa - fleiss_oracle(&bin)).abs() < 1e-12);
        assert_eq!(report.pairwise.len(), 3);
        let ab = report
            .pairwise
            .iter()
            .find(|p| p.annotator_a == "a" && p.annotator_b == "b")
            .unwrap();
        let col = |k: usize| labels.iter().map(|r| r[k]).collect::<Vec<_>>();
        assert_eq!(ab.kappa.unwrap(), cohen_kappa(&col(0), &col(1)).unwrap());
    }

    #[test]
    fn report_disjoint_annotators() {
        let records = vec![rec("d", 0, "a", Other, 1), rec("d", 1, "b", Other, 1)];
        assert_eq!(
            agreement_report(&records, None),
            Err(AgreementError::InsufficientOverlap)
        );
    }

    #[test]
    fn csv_has_all_rows() {
        let records = vec![
            rec("d", 0, "a", Other, 1),
            rec("d", 0, "b", Other, 1),
            rec("d", 1, "a", Family, 1),
            rec("d", 1, "b", Family, 1),
        ];
        let csv = agreement_report(&records, None).unwrap().to_csv();
        // header + 2 groups x 9 rows + 1 pair
        assert_eq!(csv.lines().count(), 1 + 18 + 1);
    }

    fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<u32>>> {
        (2u32..6, 2usize..15).prop_flat_map(|(n, items)| {
            prop::collection::vec(prop::collection::vec(0usize..8, n as usize), items).prop_map(|rows| {
                rows.into_iter()
                    .map(|labels| {
                        let mut r = vec![0u32; 8];
                        for l in labels {
                            r[l] += 1;
                        }
                        r
                    })
                    .collect()
            })
        })
    }

    proptest! {
        #[test]
        fn fleiss_matches_oracle_and_invariances(rows in matrix_strategy(), perm in Just(()).prop_perturb(|_, mut rng| {
            let mut p: Vec<usize> = (0..8).collect();
            for i in (1..8).rev() { p.swap(i, rng.random_range(0..=i)); }
            p
        })) {
            let m = AnnotationMatrix::from_counts(rows.clone()).unwrap();
            let k = fleiss_kappa(&m).unwrap();
            prop_assert!(k <= 1.0 + 1e-12);
            let concentrated = rows.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1);
            prop_assert_eq!((k - 1.0).abs() < 1e-12, concentrated);
            let used = rows.iter().fold(vec![0u32; 8], |mut acc, r| { for j in 0..8 { acc[j] += r[j]; } acc });
            if used.iter().filter(|&&c| c > 0).count() > 1 {
                prop_assert!((k - fleiss_oracle(&rows)).abs() < 1e-12);
            }
            let mut reversed = rows.clone();
            reversed.reverse();
            let kr = fleiss_kappa(&AnnotationMatrix::from_counts(reversed).unwrap()).unwrap();
            prop_assert!((k - kr).abs() < 1e-12);
            let renamed: Vec<Vec<u32>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
            let kn = fleiss_kappa(&AnnotationMatrix::from_counts(renamed).unwrap()).unwrap();
            prop_assert!((k - kn).abs() < 1e-12);
        }

        #[test]
        fn cohen_bounded_and_symmetric(pairs in prop::collection::vec((0usize..8, 0usize..8), 1..40)) {
            let a: Vec<Zone> = pairs.iter().map(|p| Zone::ALL[p.0]).collect();
            let b: Vec<Zone> = pairs.iter().map(|p| Zone::ALL[p.1]).collect();
            let k = cohen_kappa(&a, &b).unwrap();
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
            prop_assert!((k - cohen_kappa(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        }
    }
}
