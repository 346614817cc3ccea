//! The four zoning models, their training loop and checkpoints.

mod bilstm;
mod checkpoint;
mod cnn;
mod crf;
mod embeddings;
pub mod gradcheck;
mod iob;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Obituary, Vocabulary};
use crate::nn::{NnError, Parameter, Scalar};
use crate::Zone;

pub use bilstm::{BiLstm, BiLstmConfig, BiLstmForward, Direction, InputMode};
pub use checkpoint::{ModelCheckpoint, StoredParameter, CHECKPOINT_VERSION};
pub use cnn::{prepare_ids, Cnn, CnnCache, CnnConfig};
pub use crf::{crf_decode, crf_log_partition, crf_nll, crf_path_score, CrfGrads, CrfParams};
pub use embeddings::{load_embeddings, read_embeddings, EmbeddingError};
pub use iob::{majority_map, repair, sentence_zones, to_iob, IobTag, TAG_COUNT};
pub use train::{train, train_observed, EpochRecord, TrainConfig, TrainHistory};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("numeric failure in epoch {epoch}, batch {batch}: {message}")]
    Diverged {
        epoch: usize,
        batch: usize,
        message: String,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelType {
    #[serde(rename = "cnn")]
    Cnn,
    #[serde(rename = "bilstm-bow")]
    BiLstmBow,
    #[serde(rename = "bilstm-w2v")]
    BiLstmW2v,
    #[serde(rename = "bilstm-crf")]
    BiLstmCrf,
}

impl ModelType {
    pub const ALL: [ModelType; 4] = [
        ModelType::Cnn,
        ModelType::BiLstmBow,
        ModelType::BiLstmW2v,
        ModelType::BiLstmCrf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelType::Cnn => "cnn",
            ModelType::BiLstmBow => "bilstm-bow",
            ModelType::BiLstmW2v => "bilstm-w2v",
            ModelType::BiLstmCrf => "bilstm-crf",
        }
    }

    /// Whether the model needs pretrained embeddings.
    pub fn needs_embeddings(self) -> bool {
        matches!(self, ModelType::BiLstmW2v | ModelType::BiLstmCrf)
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelType {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelType::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            ModelError::Config(format!(
                "unknown model type {s:?} (cnn, bilstm-bow, bilstm-w2v, bilstm-crf)"
            ))
        })
    }
}

#[derive(Debug, Clone)]
pub enum Network<T> {
    Cnn(Cnn<T>),
    BiLstm(BiLstm<T>),
}

impl<T: Scalar> Network<T> {
    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        match self {
            Network::Cnn(m) => m.parameters(),
            Network::BiLstm(m) => m.parameters(),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        match self {
            Network::Cnn(m) => m.parameters_mut(),
            Network::BiLstm(m) => m.parameters_mut(),
        }
    }
}

/// A trained network together with the vocabulary it was trained with.
#[derive(Debug, Clone)]
pub struct ZoneModel {
    pub model_type: ModelType,
    pub vocabulary: Vocabulary,
    pub network: Network<f32>,
}

impl ZoneModel {
    /// One zone per sentence. The CNN sees each sentence alone; BiLSTM
    /// variants tag the whole document and map tags back per sentence.
    pub fn predict_document(&self, doc: &Obituary) -> Result<Vec<Zone>, ModelError> {
        if doc.sentences.is_empty() {
            return Err(CorpusError::EmptyDocument.into());
        }
        match &self.network {
            Network::Cnn(cnn) => doc
                .sentences
                .iter()
                .map(|s| {
                    let p = cnn.predict_proba(&self.vocabulary.encode(&s.tokens))?;
                    let best = (0..p.len()).fold(0, |b, j| if p[j] > p[b] { j } else { b });
                    Ok(Zone::from_index(best).expect("eight classes"))
                })
                .collect(),
            Network::BiLstm(net) => {
                let ids: Vec<usize> = doc
                    .sentences
                    .iter()
                    .flat_map(|s| self.vocabulary.encode(&s.tokens))
                    .collect();
                let lengths: Vec<usize> = doc.sentences.iter().map(|s| s.tokens.len()).collect();
                let tags: Vec<IobTag> = net
                    .predict_tags(&ids)?
                    .into_iter()
                    .map(|i| IobTag::from_index(i).expect("sixteen tags"))
                    .collect();
                sentence_zones(&tags, &lengths).ok_or_else(|| ModelError::Config("sentence without tokens".into()))
            }
        }
    }

    /// [`ZoneModel::predict_document`] for every document, in corpus order.
    pub fn predict_corpus(&self, corpus: &Corpus) -> Result<Vec<Vec<Zone>>, ModelError> {
        corpus.obituaries().iter().map(|d| self.predict_document(d)).collect()
    }
}
