//! Mini-batch RMSprop training with best-validation-loss model selection.

use std::path::PathBuf;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    load_embeddings, to_iob, BiLstm, BiLstmConfig, Cnn, CnnConfig, InputMode, ModelError, ModelType, Network, ZoneModel,
};
use crate::corpus::{build_vocabulary, Corpus, CorpusError, DatasetSplit, Vocabulary};
use crate::nn::{cross_entropy, softmax_cross_entropy_grad, NnError, RmsProp, RmsPropConfig, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: RmsPropConfig,
    pub min_freq: usize,
    pub max_vocab: usize,
    /// BiLSTM units per direction.
    pub hidden: usize,
    pub channels: usize,
    pub kernel_width: usize,
    pub pool_width: usize,
    pub conv_per_block: usize,
    pub max_len: usize,
    /// word2vec text file, for the embedding-based models.
    pub embeddings: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 8,
            seed: 13,
            optimizer: RmsPropConfig::default(),
            min_freq: 2,
            max_vocab: 20_000,
            hidden: 100,
            channels: 128,
            kernel_width: 3,
            pool_width: 2,
            conv_per_block: 1,
            max_len: 350,
            embeddings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub model_type: ModelType,
    pub seed: u64,
    pub batch_size: usize,
    pub vocabulary_size: usize,
    pub train_examples: usize,
    pub val_examples: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub epochs: Vec<EpochRecord>,
}

enum Example {
    Sentence { ids: Vec<usize>, gold: usize },
    Document { ids: Vec<usize>, tags: Vec<usize> },
}

fn examples(
    model_type: ModelType,
    corpus: &Corpus,
    ids: &[String],
    vocab: &Vocabulary,
) -> Result<Vec<Example>, ModelError> {
    let part = corpus.subset(ids)?;
    part.require_labeled()?;
    let mut out = Vec::new();
    for doc in part.obituaries() {
        if model_type == ModelType::Cnn {
            for s in &doc.sentences {
                out.push(Example::Sentence {
                    ids: vocab.encode(&s.tokens),
                    gold: s.gold.expect("labeled").index(),
                });
            }
        } else {
            out.push(Example::Document {
                ids: doc.sentences.iter().flat_map(|s| vocab.encode(&s.tokens)).collect(),
                tags: to_iob(doc)?.into_iter().map(|t| t.index()).collect(),
            });
        }
    }
    Ok(out)
}

/// Loss of one example; with `scale`, also accumulates scaled gradients.
fn example_loss(net: &mut Network<f32>, ex: &Example, scale: Option<f32>) -> Result<f32, NnError> {
    match (net, ex) {
        (Network::Cnn(cnn), Example::Sentence { ids, gold }) => {
            let cache = cnn.forward(ids)?;
            let loss = cross_entropy(&cache.probs, *gold)?;
            if let Some(s) = scale {
                let g = softmax_cross_entropy_grad(&cache.probs, *gold)?;
                cnn.backward(&cache, &g, s)?;
            }
            Ok(loss)
        }
        (Network::BiLstm(m), Example::Document { ids, tags }) => {
            let out = m.forward(ids)?;
            match scale {
                Some(s) => m.backward(&out, tags, s),
                None => m.loss(&out, tags),
            }
        }
        _ => unreachable!("examples are built for the network type"),
    }
}

fn build_network(model_type: ModelType, vocab: &Vocabulary, config: &TrainConfig) -> Result<Network<f32>, ModelError> {
    let v = vocab.len();
    Ok(match model_type {
        ModelType::Cnn => Network::Cnn(Cnn::new(
            CnnConfig {
                vocab_size: v,
                max_len: config.max_len,
                channels: config.channels,
                kernel_width: config.kernel_width,
                pool_width: config.pool_width,
                conv_per_block: config.conv_per_block,
                ..CnnConfig::new(v)
            },
            config.seed,
        )?),
        ModelType::BiLstmBow | ModelType::BiLstmW2v | ModelType::BiLstmCrf => {
            let (mode, table, dim) = if model_type.needs_embeddings() {
                let path = config
                    .embeddings
                    .as_ref()
                    .ok_or_else(|| ModelError::Config(format!("model {model_type} requires an embeddings file")))?;
                let (table, found) = load_embeddings(path, vocab, None)?;
                info!("embeddings: {found} of {} vocabulary tokens found", v - 2);
                let dim = table.row_len();
                (InputMode::W2v, Some(table), Some(dim))
            } else {
                (InputMode::Bow, None, None)
            };
            let mut cfg = BiLstmConfig::new(mode, v, dim, model_type == ModelType::BiLstmCrf);
            cfg.hidden = config.hidden;
            Network::BiLstm(BiLstm::new(cfg, table, config.seed)?)
        }
    })
}

/// Train `model_type` on the split's train part, selecting the epoch with
/// the lowest validation loss. The vocabulary is built from train documents.
pub fn train(
    model_type: ModelType,
    corpus: &Corpus,
    split: &DatasetSplit,
    config: &TrainConfig,
) -> Result<(ZoneModel, TrainHistory), ModelError> {
    train_observed(model_type, corpus, split, config, |_, _| {})
}

/// [`train`], calling `observe` after every epoch with the epoch record and
/// the current (not yet selected) model.
pub fn train_observed(
    model_type: ModelType,
    corpus: &Corpus,
    split: &DatasetSplit,
    config: &TrainConfig,
    mut observe: impl FnMut(&EpochRecord, &ZoneModel),
) -> Result<(ZoneModel, TrainHistory), ModelError> {
    for (name, part) in [("train", &split.train), ("validation", &split.val)] {
        if part.is_empty() {
            return Err(CorpusError::DegenerateSplit(format!("{name} part is empty")).into());
        }
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(ModelError::Config("batch size and epochs must be positive".into()));
    }
    let vocab = build_vocabulary(corpus, &split.train, config.min_freq, config.max_vocab)?;
    let train_set = examples(model_type, corpus, &split.train, &vocab)?;
    let val_set = examples(model_type, corpus, &split.val, &vocab)?;
    let network = build_network(model_type, &vocab, config)?;
    let vocabulary_size = vocab.len();
    let mut model = ZoneModel {
        model_type,
        vocabulary: vocab,
        network,
    };
    let mut opt = RmsProp::new(config.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory {
        model_type,
        seed: config.seed,
        batch_size: config.batch_size,
        vocabulary_size,
        train_examples: train_set.len(),
        val_examples: val_set.len(),
        best_epoch: 0,
        epochs: Vec::new(),
    };
    let mut best: Option<(f64, Vec<Tensor<f32>>)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0f64;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let diverged = |message: String| ModelError::Diverged {
                epoch,
                batch: b + 1,
                message,
            };
            for p in model.network.parameters_mut() {
                p.zero_grad();
            }
            let scale = 1.0 / batch.len() as f32;
            for &i in batch {
                let loss = example_loss(&mut model.network, &train_set[i], Some(scale))
                    .map_err(|e| diverged(e.to_string()))?;
                if !loss.is_finite() {
                    return Err(diverged("non-finite loss".into()));
                }
                total += f64::from(loss);
            }
            opt.step(model.network.parameters_mut())
                .map_err(|e| diverged(e.to_string()))?;
        }
        let train_loss = total / train_set.len() as f64;
        let mut val_total = 0.0f64;
        for ex in &val_set {
            val_total += f64::from(example_loss(&mut model.network, ex, None)?);
        }
        let val_loss = val_total / val_set.len() as f64;
        if !val_loss.is_finite() {
            return Err(ModelError::Diverged {
                epoch,
                batch: 0,
                message: "non-finite validation loss".into(),
            });
        }
        info!("{model_type} epoch {epoch}: train loss {train_loss:.6}, val loss {val_loss:.6}");
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
        };
        if best.as_ref().is_none_or(|(l, _)| val_loss < *l) {
            history.best_epoch = epoch;
            best = Some((
                val_loss,
                model.network.parameters().iter().map(|p| p.value.clone()).collect(),
            ));
        }
        observe(&record, &model);
        history.epochs.push(record);
    }
    let (_, values) = best.expect("at least one epoch");
    for (p, v) in model.network.parameters_mut().into_iter().zip(values) {
        p.value = v;
        p.zero_grad();
    }
    Ok((model, history))
}
