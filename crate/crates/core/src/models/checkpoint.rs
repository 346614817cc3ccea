//! `.zmc` checkpoints: a JSON manifest with base64 little-endian `f32` arrays.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BiLstm, BiLstmConfig, Cnn, CnnConfig, InputMode, ModelError, ModelType, Network, ZoneModel};
use crate::corpus::{Vocabulary, SEGMENTER_VERSION, TOKENIZER_VERSION};
use crate::nn::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredParameter {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    /// Row-major little-endian `f32`, base64.
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub model_type: ModelType,
    pub tokenizer: String,
    pub segmenter: String,
    pub config: serde_json::Value,
    /// Every vocabulary entry in index order, reserved entries included.
    pub vocabulary: Vec<String>,
    pub parameters: Vec<StoredParameter>,
}

fn encode(t: &Tensor<f32>) -> String {
    let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(p: &StoredParameter) -> Result<Tensor<f32>, ModelError> {
    let bytes = STANDARD
        .decode(&p.data)
        .map_err(|e| ModelError::Checkpoint(format!("parameter {:?}: {e}", p.name)))?;
    if bytes.len() % 4 != 0 {
        return Err(ModelError::Checkpoint(format!(
            "parameter {:?}: truncated data",
            p.name
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(p.shape.clone(), data).map_err(|e| ModelError::Checkpoint(format!("parameter {:?}: {e}", p.name)))
}

impl ModelCheckpoint {
    pub fn from_model(model: &ZoneModel) -> Self {
        let config = match &model.network {
            Network::Cnn(m) => serde_json::to_value(&m.config),
            Network::BiLstm(m) => serde_json::to_value(&m.config),
        }
        .expect("config serialises");
        let mut vocabulary: Vec<String> = (0..2)
            .map(|i| model.vocabulary.token_of(i).expect("reserved").to_string())
            .collect();
        vocabulary.extend(model.vocabulary.tokens().iter().cloned());
        ModelCheckpoint {
            format_version: CHECKPOINT_VERSION,
            model_type: model.model_type,
            tokenizer: TOKENIZER_VERSION.to_string(),
            segmenter: SEGMENTER_VERSION.to_string(),
            config,
            vocabulary,
            parameters: model
                .network
                .parameters()
                .into_iter()
                .map(|p| StoredParameter {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    trainable: p.trainable,
                    data: encode(&p.value),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let ckpt: ModelCheckpoint =
            serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(format!("invalid manifest: {e}")))?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported format version {}",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }

    pub fn into_model(self) -> Result<ZoneModel, ModelError> {
        if self.vocabulary.len() < 2 {
            return Err(ModelError::Checkpoint("vocabulary lacks reserved entries".into()));
        }
        let vocabulary = Vocabulary::from_tokens(self.vocabulary[2..].iter().cloned());
        let bad_config = |e: serde_json::Error| ModelError::Checkpoint(format!("invalid config: {e}"));
        let mut network = match self.model_type {
            ModelType::Cnn => {
                let cfg: CnnConfig = serde_json::from_value(self.config.clone()).map_err(bad_config)?;
                Network::Cnn(Cnn::new(cfg, 0)?)
            }
            _ => {
                let cfg: BiLstmConfig = serde_json::from_value(self.config.clone()).map_err(bad_config)?;
                let table = match cfg.mode {
                    InputMode::W2v => {
                        let dim = cfg
                            .embedding_dim
                            .ok_or_else(|| ModelError::Checkpoint("w2v config lacks embedding_dim".into()))?;
                        Some(Tensor::zeros(&[cfg.vocab_size, dim]))
                    }
                    InputMode::Bow => None,
                };
                Network::BiLstm(BiLstm::new(cfg, table, 0)?)
            }
        };
        let params = network.parameters_mut();
        if params.len() != self.parameters.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} parameters, found {}",
                params.len(),
                self.parameters.len()
            )));
        }
        for p in params {
            let stored = self
                .parameters
                .iter()
                .find(|s| s.name == p.name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing parameter {:?}", p.name)))?;
            if stored.shape != p.value.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {:?} has shape {:?}, expected {:?}",
                    p.name,
                    stored.shape,
                    p.value.shape()
                )));
            }
            p.value = decode(stored)?;
            p.grad = Tensor::zeros(p.value.shape());
        }
        Ok(ZoneModel {
            model_type: self.model_type,
            vocabulary,
            network,
        })
    }
}

impl ZoneModel {
    pub fn to_checkpoint_json(&self) -> String {
        ModelCheckpoint::from_model(self).to_json()
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self, ModelError> {
        ModelCheckpoint::from_json(text)?.into_model()
    }
}
