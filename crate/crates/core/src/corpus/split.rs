//! Seeded document-level train/validation/test splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub test_frac: f64,
    /// Fraction of the non-test documents held out for validation.
    pub val_frac_of_train: f64,
    pub seed: u64,
    /// Split every source separately and concatenate the parts.
    pub stratify_by_source: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_frac: 0.7,
            test_frac: 0.3,
            val_frac_of_train: 0.1,
            seed: 13,
            stratify_by_source: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Round half up. The nudge keeps products such as 0.35 * 10 on the intended side.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

fn part_sizes(n: usize, config: &SplitConfig) -> (usize, usize) {
    let n_test = round_half_up(config.test_frac * n as f64).min(n);
    let n_val = round_half_up(config.val_frac_of_train * (n - n_test) as f64).min(n - n_test);
    (n_test, n_val)
}

fn check_fraction(name: &str, f: f64) -> Result<(), CorpusError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(CorpusError::InvalidFractions(format!("{name} = {f} is not in (0, 1)")))
    }
}

pub fn split_corpus(corpus: &Corpus, config: &SplitConfig) -> Result<DatasetSplit, CorpusError> {
    check_fraction("train_frac", config.train_frac)?;
    check_fraction("test_frac", config.test_frac)?;
    check_fraction("val_frac_of_train", config.val_frac_of_train)?;
    if (config.train_frac + config.test_frac - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidFractions(format!(
            "train_frac + test_frac = {} (must be 1)",
            config.train_frac + config.test_frac
        )));
    }
    if corpus.is_empty() {
        return Err(CorpusError::DegenerateSplit("corpus is empty".into()));
    }

    let groups: Vec<Vec<String>> = if config.stratify_by_source {
        let mut by_source: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for o in corpus.obituaries() {
            by_source.entry(&o.source).or_default().push(o.id.clone());
        }
        by_source.into_values().collect()
    } else {
        vec![corpus.ids().into_iter().map(String::from).collect()]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut split = DatasetSplit {
        seed: config.seed,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for mut ids in groups {
        ids.shuffle(&mut rng);
        let (n_test, n_val) = part_sizes(ids.len(), config);
        let rest = ids.split_off(n_test);
        split.test.extend(ids);
        let mut rest = rest;
        let train = rest.split_off(n_val);
        split.val.extend(rest);
        split.train.extend(train);
    }

    for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        if part.is_empty() {
            return Err(CorpusError::DegenerateSplit(format!(
                "{name} part is empty for {} documents",
                corpus.len()
            )));
        }
    }
    Ok(split)
}
