//! Sentence classifier: one-hot tokens, stacked conv/pool blocks, global max,
//! dense softmax over the eight zones.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::PAD_INDEX;
use crate::nn::{
    conv1d_backward, conv1d_forward, conv1d_onehot_backward, conv1d_onehot_forward, dense_backward, dense_forward,
    maxpool1d_backward, maxpool1d_forward, relu_backward, relu_forward, softmax, Initializer, NnError, Parameter,
    Scalar, Tensor,
};
use crate::Zone;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub blocks: usize,
    pub channels: usize,
    pub kernel_width: usize,
    pub pool_width: usize,
    pub conv_per_block: usize,
    pub classes: usize,
}

impl CnnConfig {
    pub fn new(vocab_size: usize) -> Self {
        CnnConfig {
            vocab_size,
            max_len: 350,
            blocks: 3,
            channels: 128,
            kernel_width: 3,
            pool_width: 2,
            conv_per_block: 1,
            classes: Zone::COUNT,
        }
    }

    /// Shortest input that survives every block with at least one step left.
    pub fn min_len(&self) -> usize {
        let mut len = 1;
        for _ in 0..self.blocks {
            len = len * self.pool_width + self.conv_per_block * (self.kernel_width - 1);
        }
        len
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.vocab_size > 2
            && self.blocks >= 1
            && self.channels >= 1
            && self.kernel_width >= 1
            && self.pool_width >= 1
            && (1..=2).contains(&self.conv_per_block)
            && self.classes >= 1
            && self.max_len >= self.min_len();
        if ok {
            Ok(())
        } else {
            Err(NnError::Shape(format!("invalid cnn configuration {self:?}")))
        }
    }
}

/// Truncate to `max_len` and right-pad with the padding id up to `min_len`.
pub fn prepare_ids(ids: &[usize], config: &CnnConfig) -> Result<Vec<usize>, NnError> {
    if ids.is_empty() {
        return Err(NnError::Shape("empty token list".into()));
    }
    let mut out = ids.to_vec();
    if out.len() > config.max_len {
        warn!("truncating sentence of {} tokens to {}", out.len(), config.max_len);
        out.truncate(config.max_len);
    }
    let min = config.min_len();
    if out.len() < min {
        out.resize(min, PAD_INDEX);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Cnn<T> {
    pub config: CnnConfig,
    /// Kernel and bias per convolution, in application order. The first
    /// kernel is `[K x vocab x C]` and indexed by token id.
    pub convs: Vec<(Parameter<T>, Parameter<T>)>,
    pub out_weight: Parameter<T>,
    pub out_bias: Parameter<T>,
}

enum Step<T> {
    Conv {
        index: usize,
        input: Option<Tensor<T>>,
        pre: Tensor<T>,
    },
    Pool {
        argmax: Vec<usize>,
        shape: Vec<usize>,
    },
}

pub struct CnnCache<T> {
    ids: Vec<usize>,
    steps: Vec<Step<T>>,
    features: Tensor<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> Cnn<T> {
    pub fn new(config: CnnConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut init = Initializer::new(seed);
        let (k, c) = (config.kernel_width, config.channels);
        let mut convs = Vec::new();
        for i in 0..config.blocks * config.conv_per_block {
            let cin = if i == 0 { config.vocab_size } else { c };
            convs.push((
                Parameter::new(format!("conv{i}.kernel"), init.glorot(&[k, cin, c], k * cin, k * c)),
                Parameter::new(format!("conv{i}.bias"), Tensor::zeros(&[c])),
            ));
        }
        Ok(Cnn {
            out_weight: Parameter::new("out.weight", init.glorot(&[c, config.classes], c, config.classes)),
            out_bias: Parameter::new("out.bias", Tensor::zeros(&[config.classes])),
            convs,
            config,
        })
    }

    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        let mut v: Vec<&Parameter<T>> = self.convs.iter().flat_map(|(k, b)| [k, b]).collect();
        v.push(&self.out_weight);
        v.push(&self.out_bias);
        v
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut v: Vec<&mut Parameter<T>> = self.convs.iter_mut().flat_map(|(k, b)| [k, b]).collect();
        v.push(&mut self.out_weight);
        v.push(&mut self.out_bias);
        v
    }

    /// Class probabilities for one sentence of raw token ids.
    pub fn forward(&self, ids: &[usize]) -> Result<CnnCache<T>, NnError> {
        let ids = prepare_ids(ids, &self.config)?;
        let mut steps = Vec::new();
        let mut x: Option<Tensor<T>> = None;
        let mut conv = 0;
        for _ in 0..self.config.blocks {
            for _ in 0..self.config.conv_per_block {
                let (kernel, bias) = &self.convs[conv];
                let pre = match &x {
                    None => conv1d_onehot_forward(&ids, &kernel.value, &bias.value)?,
                    Some(input) => conv1d_forward(input, &kernel.value, &bias.value)?,
                };
                let act = relu_forward(&pre);
                steps.push(Step::Conv {
                    index: conv,
                    input: x.take(),
                    pre,
                });
                x = Some(act);
                conv += 1;
            }
            let input = x.take().expect("conv output");
            let pool = maxpool1d_forward(&input, self.config.pool_width)?;
            steps.push(Step::Pool {
                argmax: pool.argmax,
                shape: input.shape().to_vec(),
            });
            x = Some(pool.output);
        }
        let last = x.expect("block output");
        let global = maxpool1d_forward(&last, last.rows())?;
        steps.push(Step::Pool {
            argmax: global.argmax,
            shape: last.shape().to_vec(),
        });
        let logits = dense_forward(&global.output, &self.out_weight.value, &self.out_bias.value)?;
        let probs = softmax(logits.data());
        Ok(CnnCache {
            ids,
            steps,
            features: global.output,
            probs,
        })
    }

    pub fn predict_proba(&self, ids: &[usize]) -> Result<Vec<T>, NnError> {
        Ok(self.forward(ids)?.probs)
    }

    /// Accumulate `scale * d(loss)/d(param)` into the parameter gradients,
    /// given the gradient of the loss with respect to the logits.
    pub fn backward(&mut self, cache: &CnnCache<T>, grad_logits: &[T], scale: T) -> Result<(), NnError> {
        let g = Tensor::new(
            vec![1, grad_logits.len()],
            grad_logits.iter().map(|&v| v * scale).collect(),
        )?;
        let dense = dense_backward(&cache.features, &self.out_weight.value, &g)?;
        self.out_weight.grad.add_assign(&dense.weight);
        self.out_bias.grad.add_assign(&dense.bias);
        let mut grad = dense.input;
        for step in cache.steps.iter().rev() {
            match step {
                Step::Pool { argmax, shape } => grad = maxpool1d_backward(&grad, argmax, shape),
                Step::Conv { index, input, pre } => {
                    let g_pre = relu_backward(pre, &grad);
                    let (kernel, bias) = &mut self.convs[*index];
                    match input {
                        None => {
                            conv1d_onehot_backward(&cache.ids, &g_pre, &mut kernel.grad, &mut bias.grad)?;
                        }
                        Some(x) => {
                            let c = conv1d_backward(x, &kernel.value, &g_pre)?;
                            kernel.grad.add_assign(&c.kernel);
                            bias.grad.add_assign(&c.bias);
                            grad = c.input;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
