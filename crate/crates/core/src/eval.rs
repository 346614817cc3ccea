//! Confusion matrices, per-zone precision/recall/F1 and error listings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::Zone;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("evaluation input: {0}")]
pub struct EvalError(pub String);

/// Rows are gold zones, columns predicted zones, both in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; Zone::COUNT]; Zone::COUNT],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; Zone::COUNT]; Zone::COUNT]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn add(&mut self, gold: Zone, pred: Zone) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    pub fn get(&self, gold: Zone, pred: Zone) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn counts(&self) -> &[[u64; Zone::COUNT]; Zone::COUNT] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..Zone::COUNT).map(|i| self.counts[i][i]).sum()
    }

    /// Header row and column of zone codes; rows are gold.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for z in Zone::ALL {
            out.push(',');
            out.push_str(z.code());
        }
        out.push('\n');
        for g in Zone::ALL {
            out.push_str(g.code());
            for p in Zone::ALL {
                out.push_str(&format!(",{}", self.get(g, p)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(gold: &[Zone], pred: &[Zone]) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(EvalError("no labels to compare".into()));
    }
    let mut m = ConfusionMatrix::default();
    for (&g, &p) in gold.iter().zip(pred) {
        m.add(g, p);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub zone: Zone,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold sentences of this zone.
    pub support: u64,
    pub predicted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub total: u64,
    pub correct: u64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-zone metrics with `0/0 = 0`; macro averages run over all eight zones.
pub fn metrics(matrix: &ConfusionMatrix) -> Result<EvalReport, EvalError> {
    let total = matrix.total();
    if total == 0 {
        return Err(EvalError("empty confusion matrix".into()));
    }
    let c = matrix.counts();
    let classes: Vec<ClassMetrics> = Zone::ALL
        .iter()
        .map(|&z| {
            let k = z.index();
            let support: u64 = c[k].iter().sum();
            let predicted: u64 = (0..Zone::COUNT).map(|g| c[g][k]).sum();
            let precision = ratio(c[k][k], predicted);
            let recall = ratio(c[k][k], support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                zone: z,
                precision,
                recall,
                f1,
                support,
                predicted,
            }
        })
        .collect();
    let n = Zone::COUNT as f64;
    let correct = matrix.trace();
    Ok(EvalReport {
        macro_precision: classes.iter().map(|m| m.precision).sum::<f64>() / n,
        macro_recall: classes.iter().map(|m| m.recall).sum::<f64>() / n,
        macro_f1: classes.iter().map(|m| m.f1).sum::<f64>() / n,
        micro_f1: ratio(correct, total),
        classes,
        total,
        correct,
        confusion: matrix.clone(),
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    /// `class,precision,recall,f1`, then `macro` and `micro` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1\n");
        for m in &self.classes {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                m.zone.code(),
                m.precision,
                m.recall,
                m.f1
            ));
        }
        out.push_str(&format!(
            "macro,{:.6},{:.6},{:.6}\n",
            self.macro_precision, self.macro_recall, self.macro_f1
        ));
        out.push_str(&format!(
            "micro,{:.6},{:.6},{:.6}\n",
            self.micro_f1, self.micro_f1, self.micro_f1
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub doc_id: String,
    pub sentence_idx: usize,
    pub gold: Zone,
    pub pred: Zone,
    pub text: String,
}

pub const ERROR_HEADER: &str = "doc_id\tsentence_idx\tgold\tpred\ttext\terror_type";

/// Misclassified sentences. `gold` and `pred` hold one zone list per
/// corpus document, in corpus order.
pub fn error_rows(corpus: &Corpus, gold: &[Vec<Zone>], pred: &[Vec<Zone>]) -> Result<Vec<ErrorRow>, EvalError> {
    let docs = corpus.obituaries();
    if gold.len() != docs.len() || pred.len() != docs.len() {
        return Err(EvalError("label lists are not aligned with the corpus".into()));
    }
    let mut rows = Vec::new();
    for ((doc, g), p) in docs.iter().zip(gold).zip(pred) {
        if g.len() != doc.sentences.len() || p.len() != doc.sentences.len() {
            return Err(EvalError(format!(
                "document {:?}: label count differs from sentence count",
                doc.id
            )));
        }
        for ((s, &gz), &pz) in doc.sentences.iter().zip(g).zip(p) {
            if gz != pz {
                rows.push(ErrorRow {
                    doc_id: doc.id.clone(),
                    sentence_idx: s.index,
                    gold: gz,
                    pred: pz,
                    text: s.text.clone(),
                });
            }
        }
    }
    Ok(rows)
}

fn tsv_field(s: &str) -> String {
    s.chars()
        .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
        .collect()
}

/// TSV with an empty trailing `error_type` column for manual tagging.
pub fn error_export(corpus: &Corpus, gold: &[Vec<Zone>], pred: &[Vec<Zone>]) -> Result<String, EvalError> {
    let mut out = String::from(ERROR_HEADER);
    out.push('\n');
    for r in error_rows(corpus, gold, pred)? {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t\n",
            tsv_field(&r.doc_id),
            r.sentence_idx,
            r.gold,
            r.pred,
            tsv_field(&r.text)
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::corpus::Obituary;
    use Zone::*;

    #[test]
    fn single_confusion_entry() {
        let m = confusion(&[PersonalInformation], &[BiographicalSketch]).unwrap();
        assert_eq!(m.get(PersonalInformation, BiographicalSketch), 1);
        assert_eq!(m.total(), 1);
        assert_eq!(m.trace(), 0);
    }

    #[test]
    fn input_errors() {
        assert!(confusion(&[Other], &[]).is_err());
        assert!(confusion(&[], &[]).is_err());
        assert!(metrics(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn perfect_diagonal_is_one_where_present() {
        let all: Vec<Zone> = Zone::ALL.to_vec();
        let r = metrics(&confusion(&all, &all).unwrap()).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.micro_f1, 1.0);
        assert!(r.classes.iter().all(|c| c.precision == 1.0 && c.recall == 1.0));
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        let gold = [Tribute, Family, Family];
        let pred = [Family, Family, Family];
        let r = metrics(&confusion(&gold, &pred).unwrap()).unwrap();
        let t = &r.classes[Tribute.index()];
        assert_eq!((t.precision, t.recall, t.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn csv_layouts() {
        let m = confusion(&[Family, Other], &[Family, Family]).unwrap();
        let csv = m.to_csv();
        assert!(csv.starts_with("gold\\pred,PI,BS,FA,C,T,G,FI,O\n"));
        assert!(csv.contains("\nO,0,0,1,0,0,0,0,0\n"));
        let r = metrics(&m).unwrap().to_csv();
        assert_eq!(r.lines().count(), 11);
        assert!(r.contains("\nmicro,0.500000,0.500000,0.500000\n"));
    }

    #[test]
    fn error_export_rows() {
        let doc =
            Obituary::from_sentences("d1", "US", None, [("Jane Doe died.", None), ("She\tloved golf.", None)]).unwrap();
        let corpus = Corpus::new(vec![doc]).unwrap();
        let gold = vec![vec![PersonalInformation, Characteristics]];
        let tsv = error_export(&corpus, &gold, &gold).unwrap();
        assert_eq!(tsv, format!("{ERROR_HEADER}\n"));
        let pred = vec![vec![PersonalInformation, Family]];
        let tsv = error_export(&corpus, &gold, &pred).unwrap();
        assert_eq!(tsv.lines().nth(1).unwrap(), "d1\t1\tC\tFA\tShe loved golf.\t");
    }

    fn matrix_strategy() -> impl Strategy<Value = [[u64; 8]; 8]> {
        proptest::collection::vec(0u64..20, 64).prop_map(|v| {
            let mut m = [[0u64; 8]; 8];
            for (i, x) in v.into_iter().enumerate() {
                m[i / 8][i % 8] = x;
            }
            m[0][0] += 1;
            m
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn micro_is_accuracy_and_macro_is_bounded(m in matrix_strategy()) {
            let cm = ConfusionMatrix::from_counts(m);
            let r = metrics(&cm).unwrap();
            prop_assert_eq!(r.micro_f1, cm.trace() as f64 / cm.total() as f64);
            let f1s: Vec<f64> = r.classes.iter().map(|c| c.f1).collect();
            let lo = f1s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = f1s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r.macro_f1 >= lo - 1e-15 && r.macro_f1 <= hi + 1e-15);
            for c in &r.classes {
                for v in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn relabelling_permutes_metrics(m in matrix_strategy(), perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle()) {
            let mut p = [[0u64; 8]; 8];
            for g in 0..8 {
                for q in 0..8 {
                    p[perm[g]][perm[q]] = m[g][q];
                }
            }
            let a = metrics(&ConfusionMatrix::from_counts(m)).unwrap();
            let b = metrics(&ConfusionMatrix::from_counts(p)).unwrap();
            for k in 0..8 {
                prop_assert_eq!(a.classes[k].f1, b.classes[perm[k]].f1);
            }
            prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
            prop_assert_eq!(a.micro_f1, b.micro_f1);
        }

        #[test]
        fn order_invariance(pairs in proptest::collection::vec((0usize..8, 0usize..8), 1..50)) {
            let gold: Vec<Zone> = pairs.iter().map(|p| Zone::from_index(p.0).unwrap()).collect();
            let pred: Vec<Zone> = pairs.iter().map(|p| Zone::from_index(p.1).unwrap()).collect();
            let a = confusion(&gold, &pred).unwrap();
            let b = confusion(&gold.iter().rev().copied().collect::<Vec<_>>(), &pred.iter().rev().copied().collect::<Vec<_>>()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
