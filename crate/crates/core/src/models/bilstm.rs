//! Document-level BiLSTM tagger over the 16 IOB tags, with an optional CRF
//! output layer.

use serde::{Deserialize, Serialize};

use super::crf::{crf_decode, crf_nll, CrfParams};
use super::iob::TAG_COUNT;
use crate::nn::{
    bilstm_backward, bilstm_forward, cross_entropy, dense_backward, dense_forward, softmax, softmax_rows, BiLstmCache,
    Initializer, NnError, Parameter, Scalar, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// One-hot tokens, realised as a trainable lookup of input projections.
    Bow,
    /// Frozen pretrained vectors followed by a trainable projection.
    W2v,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmConfig {
    pub mode: InputMode,
    pub vocab_size: usize,
    /// Required in `W2v` mode.
    pub embedding_dim: Option<usize>,
    /// Units per direction.
    pub hidden: usize,
    pub tags: usize,
    pub crf: bool,
}

impl BiLstmConfig {
    pub fn new(mode: InputMode, vocab_size: usize, embedding_dim: Option<usize>, crf: bool) -> Self {
        BiLstmConfig {
            mode,
            vocab_size,
            embedding_dim,
            hidden: 100,
            tags: TAG_COUNT,
            crf,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Direction<T> {
    /// `[vocab x 4H]` in `Bow` mode, `[E x 4H]` in `W2v` mode.
    pub input: Parameter<T>,
    pub recurrent: Parameter<T>,
    pub bias: Parameter<T>,
}

#[derive(Debug, Clone)]
pub struct BiLstm<T> {
    pub config: BiLstmConfig,
    /// Frozen `[vocab x E]` table, `W2v` mode only.
    pub embedding: Option<Parameter<T>>,
    pub forward_dir: Direction<T>,
    pub backward_dir: Direction<T>,
    pub out_weight: Parameter<T>,
    pub out_bias: Parameter<T>,
    pub crf: Option<(Parameter<T>, Parameter<T>, Parameter<T>)>,
}

pub struct BiLstmForward<T> {
    ids: Vec<usize>,
    embedded: Option<Tensor<T>>,
    cache: BiLstmCache<T>,
    hidden: Tensor<T>,
    /// `[T x tags]`
    pub logits: Tensor<T>,
}

fn direction<T: Scalar>(init: &mut Initializer, name: &str, rows: usize, h: usize) -> Direction<T> {
    let mut bias = Tensor::zeros(&[4 * h]);
    bias.data_mut()[h..2 * h].fill(T::one());
    Direction {
        input: Parameter::new(format!("{name}.input"), init.glorot(&[rows, 4 * h], rows, 4 * h)),
        recurrent: Parameter::new(format!("{name}.recurrent"), init.glorot(&[h, 4 * h], h, 4 * h)),
        bias: Parameter::new(format!("{name}.bias"), bias),
    }
}

impl<T: Scalar> BiLstm<T> {
    /// `embedding` is required in `W2v` mode and must be `[vocab x E]`.
    pub fn new(config: BiLstmConfig, embedding: Option<Tensor<T>>, seed: u64) -> Result<Self, NnError> {
        let h = config.hidden;
        if h == 0 || config.tags == 0 || config.vocab_size <= 2 {
            return Err(NnError::Shape(format!("invalid bilstm configuration {config:?}")));
        }
        let rows = match config.mode {
            InputMode::Bow => config.vocab_size,
            InputMode::W2v => {
                let table = embedding
                    .as_ref()
                    .ok_or_else(|| NnError::Shape("w2v mode requires an embedding table".into()))?;
                let [v, e] = *table.shape() else {
                    return Err(NnError::Shape("embedding table must be 2-D".into()));
                };
                if v != config.vocab_size || config.embedding_dim.is_some_and(|d| d != e) {
                    return Err(NnError::Shape(format!(
                        "embedding table {:?} does not match vocabulary {} / dimension {:?}",
                        table.shape(),
                        config.vocab_size,
                        config.embedding_dim
                    )));
                }
                e
            }
        };
        let mut init = Initializer::new(seed);
        let forward_dir = direction(&mut init, "fwd", rows, h);
        let backward_dir = direction(&mut init, "bwd", rows, h);
        let out_weight = Parameter::new("out.weight", init.glorot(&[2 * h, config.tags], 2 * h, config.tags));
        let crf = config.crf.then(|| {
            (
                Parameter::new("crf.transitions", Tensor::zeros(&[config.tags, config.tags])),
                Parameter::new("crf.start", Tensor::zeros(&[config.tags])),
                Parameter::new("crf.stop", Tensor::zeros(&[config.tags])),
            )
        });
        let embedding = match config.mode {
            InputMode::W2v => embedding.map(|t| Parameter::frozen("embedding", t)),
            InputMode::Bow => None,
        };
        let mut config = config;
        if config.mode == InputMode::W2v {
            config.embedding_dim = Some(rows);
        }
        Ok(BiLstm {
            out_bias: Parameter::new("out.bias", Tensor::zeros(&[config.tags])),
            config,
            embedding,
            forward_dir,
            backward_dir,
            out_weight,
            crf,
        })
    }

    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        let mut v: Vec<&Parameter<T>> = Vec::new();
        v.extend(self.embedding.as_ref());
        for d in [&self.forward_dir, &self.backward_dir] {
            v.extend([&d.input, &d.recurrent, &d.bias]);
        }
        v.extend([&self.out_weight, &self.out_bias]);
        if let Some((a, b, c)) = &self.crf {
            v.extend([a, b, c]);
        }
        v
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut v: Vec<&mut Parameter<T>> = Vec::new();
        v.extend(self.embedding.as_mut());
        for d in [&mut self.forward_dir, &mut self.backward_dir] {
            v.extend([&mut d.input, &mut d.recurrent, &mut d.bias]);
        }
        v.extend([&mut self.out_weight, &mut self.out_bias]);
        if let Some((a, b, c)) = &mut self.crf {
            v.extend([a, b, c]);
        }
        v
    }

    fn crf_params(&self) -> Option<CrfParams<T>> {
        self.crf.as_ref().map(|(t, s, e)| CrfParams {
            transitions: t.value.clone(),
            start: s.value.clone(),
            stop: e.value.clone(),
        })
    }

    fn project(&self, ids: &[usize], embedded: Option<&Tensor<T>>, dir: &Direction<T>) -> Result<Tensor<T>, NnError> {
        match embedded {
            Some(x) => dense_forward(x, &dir.input.value, &Tensor::zeros(&[dir.bias.value.len()])),
            None => {
                let table = &dir.input.value;
                let mut out = Tensor::zeros(&[ids.len(), table.row_len()]);
                for (t, &id) in ids.iter().enumerate() {
                    out.row_mut(t).copy_from_slice(table.row(id));
                }
                Ok(out)
            }
        }
    }

    /// Tag logits for a whole document's token ids.
    pub fn forward(&self, ids: &[usize]) -> Result<BiLstmForward<T>, NnError> {
        if ids.is_empty() {
            return Err(NnError::Shape("empty document".into()));
        }
        let vocab = self.config.vocab_size;
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(NnError::Index { index: bad, len: vocab });
        }
        let embedded = self.embedding.as_ref().map(|table| {
            let mut x = Tensor::zeros(&[ids.len(), table.value.row_len()]);
            for (t, &id) in ids.iter().enumerate() {
                x.row_mut(t).copy_from_slice(table.value.row(id));
            }
            x
        });
        let pf = self.project(ids, embedded.as_ref(), &self.forward_dir)?;
        let pb = self.project(ids, embedded.as_ref(), &self.backward_dir)?;
        let (hidden, cache) = bilstm_forward(
            &pf,
            &pb,
            (&self.forward_dir.recurrent.value, &self.forward_dir.bias.value),
            (&self.backward_dir.recurrent.value, &self.backward_dir.bias.value),
        )?;
        let logits = dense_forward(&hidden, &self.out_weight.value, &self.out_bias.value)?;
        Ok(BiLstmForward {
            ids: ids.to_vec(),
            embedded,
            cache,
            hidden,
            logits,
        })
    }

    /// Per-token tag distributions (softmax of the logits).
    pub fn predict_proba(&self, ids: &[usize]) -> Result<Tensor<T>, NnError> {
        Ok(softmax_rows(&self.forward(ids)?.logits))
    }

    /// Best tag per token: Viterbi with a CRF, otherwise per-token argmax.
    pub fn predict_tags(&self, ids: &[usize]) -> Result<Vec<usize>, NnError> {
        let out = self.forward(ids)?;
        match self.crf_params() {
            Some(crf) => crf_decode(&out.logits, &crf),
            None => Ok((0..out.logits.rows())
                .map(|t| {
                    let r = out.logits.row(t);
                    (0..r.len()).fold(0, |b, j| if r[j] > r[b] { j } else { b })
                })
                .collect()),
        }
    }

    /// Document loss: mean token cross-entropy, or the CRF negative
    /// log-likelihood of the whole tag sequence.
    pub fn loss(&self, out: &BiLstmForward<T>, gold: &[usize]) -> Result<T, NnError> {
        Ok(self.loss_and_logit_grad(out, gold)?.0)
    }

    fn loss_and_logit_grad(
        &self,
        out: &BiLstmForward<T>,
        gold: &[usize],
    ) -> Result<(T, Tensor<T>, Option<CrfParams<T>>), NnError> {
        let steps = out.logits.rows();
        if gold.len() != steps {
            return Err(NnError::Shape(format!("{} gold tags for {steps} tokens", gold.len())));
        }
        match self.crf_params() {
            Some(crf) => {
                let (nll, g) = crf_nll(&out.logits, &crf, gold)?;
                let grads = CrfParams {
                    transitions: g.transitions,
                    start: g.start,
                    stop: g.stop,
                };
                Ok((nll, g.emissions, Some(grads)))
            }
            None => {
                let n = T::from_usize(steps).expect("length");
                let mut grad = Tensor::zeros(out.logits.shape());
                let mut loss = T::zero();
                for (t, &y) in gold.iter().enumerate() {
                    let p = softmax(out.logits.row(t));
                    loss += cross_entropy(&p, y)?;
                    if y >= p.len() {
                        return Err(NnError::Index { index: y, len: p.len() });
                    }
                    let row = grad.row_mut(t);
                    for (g, &pv) in row.iter_mut().zip(&p) {
                        *g = pv / n;
                    }
                    row[y] -= T::one() / n;
                }
                Ok((loss / n, grad, None))
            }
        }
    }

    /// Accumulate `scale` times the document-loss gradient; returns the loss.
    pub fn backward(&mut self, out: &BiLstmForward<T>, gold: &[usize], scale: T) -> Result<T, NnError> {
        let (loss, mut g_logits, crf_grads) = self.loss_and_logit_grad(out, gold)?;
        g_logits.scale(scale);
        if let (Some(g), Some((tr, st, sp))) = (crf_grads, self.crf.as_mut()) {
            for (param, mut grad) in [(tr, g.transitions), (st, g.start), (sp, g.stop)] {
                grad.scale(scale);
                param.grad.add_assign(&grad);
            }
        }
        let dense = dense_backward(&out.hidden, &self.out_weight.value, &g_logits)?;
        self.out_weight.grad.add_assign(&dense.weight);
        self.out_bias.grad.add_assign(&dense.bias);
        let (gf, gb) = bilstm_backward(
            &out.cache,
            &self.forward_dir.recurrent.value,
            &self.backward_dir.recurrent.value,
            &dense.input,
        )?;
        for (dir, g) in [(&mut self.forward_dir, gf), (&mut self.backward_dir, gb)] {
            dir.recurrent.grad.add_assign(&g.recurrent);
            dir.bias.grad.add_assign(&g.bias);
            match &out.embedded {
                Some(x) => {
                    let d = dense_backward(x, &dir.input.value, &g.projected)?;
                    dir.input.grad.add_assign(&d.weight);
                }
                None => {
                    for (t, &id) in out.ids.iter().enumerate() {
                        for (acc, &v) in dir.input.grad.row_mut(id).iter_mut().zip(g.projected.row(t)) {
                            *acc += v;
                        }
                    }
                }
            }
        }
        Ok(loss)
    }
}
