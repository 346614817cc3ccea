//! Central finite-difference checks of analytic gradients, in `f64`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    bilstm_backward, bilstm_forward, conv1d_backward, conv1d_forward, conv1d_onehot_backward, conv1d_onehot_forward,
    cross_entropy, dense_backward, dense_forward, lstm_backward, lstm_forward, maxpool1d_backward, maxpool1d_forward,
    relu_backward, relu_forward, softmax, softmax_cross_entropy_grad, NnError, Tensor,
};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// A scalar function of a flat parameter vector with an analytic gradient.
pub trait Differentiable {
    fn parameters(&self) -> Vec<f64>;
    fn loss_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>), NnError>;
}

/// Maximum relative error over every parameter coordinate.
pub fn max_relative_error<D: Differentiable + ?Sized>(module: &D, epsilon: f64) -> Result<f64, NnError> {
    let mut params = module.parameters();
    let (_, analytic) = module.loss_and_gradient(&params)?;
    if analytic.len() != params.len() {
        return Err(NnError::Shape(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + epsilon;
        let (plus, _) = module.loss_and_gradient(&params)?;
        params[i] = orig - epsilon;
        let (minus, _) = module.loss_and_gradient(&params)?;
        params[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

/// A differentiable case built from a closure over the flat parameters.
pub struct FnCase<F> {
    params: Vec<f64>,
    f: F,
}

impl<F> FnCase<F>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>), NnError>,
{
    pub fn new(params: Vec<f64>, f: F) -> Self {
        FnCase { params, f }
    }
}

impl<F> Differentiable for FnCase<F>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>), NnError>,
{
    fn parameters(&self) -> Vec<f64> {
        self.params.clone()
    }

    fn loss_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
        (self.f)(params)
    }
}

/// Splits a flat vector into tensors of fixed shapes, and back.
#[derive(Debug, Clone)]
pub struct Layout {
    shapes: Vec<Vec<usize>>,
}

impl Layout {
    pub fn new(shapes: &[&[usize]]) -> Self {
        Layout {
            shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.shapes.iter().map(|s| s.iter().product::<usize>()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unpack(&self, flat: &[f64]) -> Vec<Tensor<f64>> {
        let mut out = Vec::with_capacity(self.shapes.len());
        let mut at = 0;
        for s in &self.shapes {
            let n: usize = s.iter().product();
            out.push(Tensor::new(s.clone(), flat[at..at + n].to_vec()).expect("layout shape"));
            at += n;
        }
        out
    }

    pub fn pack(tensors: &[&Tensor<f64>]) -> Vec<f64> {
        tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }
}

/// Random values with magnitude in `[0.2, 1]` and random sign, so that no
/// coordinate sits near a kink of ReLU at zero.
pub fn signed_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.2..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// Distinct values spaced at least 0.05 apart, in random order.
fn distinct_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.05 - n as f64 * 0.025).collect();
    v.shuffle(rng);
    v
}

/// Layers covered by [`check_layer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerCase {
    Dense,
    Relu,
    Conv1d,
    Conv1dOneHot,
    MaxPool,
    SoftmaxCrossEntropy,
    Lstm,
    BiLstm,
}

impl LayerCase {
    pub const ALL: [LayerCase; 8] = [
        LayerCase::Dense,
        LayerCase::Relu,
        LayerCase::Conv1d,
        LayerCase::Conv1dOneHot,
        LayerCase::MaxPool,
        LayerCase::SoftmaxCrossEntropy,
        LayerCase::Lstm,
        LayerCase::BiLstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerCase::Dense => "dense",
            LayerCase::Relu => "relu",
            LayerCase::Conv1d => "conv1d",
            LayerCase::Conv1dOneHot => "conv1d_onehot",
            LayerCase::MaxPool => "maxpool1d",
            LayerCase::SoftmaxCrossEntropy => "softmax_cross_entropy",
            LayerCase::Lstm => "lstm",
            LayerCase::BiLstm => "bilstm",
        }
    }
}

/// `sum(r * y)` and its gradient `r`, for a fixed random projection `r`.
fn project(y: &Tensor<f64>, r: &[f64]) -> f64 {
    y.data().iter().zip(r).map(|(a, b)| a * b).sum()
}

fn one_trial(case: LayerCase, rng: &mut ChaCha8Rng) -> Result<f64, NnError> {
    let eps = DEFAULT_EPSILON;
    match case {
        LayerCase::Dense => {
            let (n, d, h) = (rng.random_range(1..4), rng.random_range(1..6), rng.random_range(1..6));
            let layout = Layout::new(&[&[n, d], &[d, h], &[h]]);
            let r = signed_values(rng, n * h);
            let case = FnCase::new(signed_values(rng, layout.len()), move |p| {
                let t = layout.unpack(p);
                let y = dense_forward(&t[0], &t[1], &t[2])?;
                let g = dense_backward(&t[0], &t[1], &Tensor::new(y.shape().to_vec(), r.clone())?)?;
                Ok((project(&y, &r), Layout::pack(&[&g.input, &g.weight, &g.bias])))
            });
            max_relative_error(&case, eps)
        }
        LayerCase::Relu => {
            let n = rng.random_range(1..12);
            let r = signed_values(rng, n);
            let case = FnCase::new(signed_values(rng, n), move |p| {
                let x = Tensor::vector(p.to_vec());
                let y = relu_forward(&x);
                let g = relu_backward(&x, &Tensor::vector(r.clone()));
                Ok((project(&y, &r), g.into_data()))
            });
            max_relative_error(&case, eps)
        }
        LayerCase::Conv1d => {
            let (k, cin, cout) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
            let t = k + rng.random_range(0..4);
            let layout = Layout::new(&[&[t, cin], &[k, cin, cout], &[cout]]);
            let r = signed_values(rng, (t - k + 1) * cout);
            let case = FnCase::new(signed_values(rng, layout.len()), move |p| {
                let x = layout.unpack(p);
                let y = conv1d_forward(&x[0], &x[1], &x[2])?;
                let g = conv1d_backward(&x[0], &x[1], &Tensor::new(y.shape().to_vec(), r.clone())?)?;
                Ok((project(&y, &r), Layout::pack(&[&g.input, &g.kernel, &g.bias])))
            });
            max_relative_error(&case, eps)
        }
        LayerCase::Conv1dOneHot => {
            let (k, vocab, cout) = (rng.random_range(1..4), rng.random_range(2..6), rng.random_range(1..4));
            let t = k + rng.random_range(0..4);
            let ids: Vec<usize> = (0..t).map(|_| rng.random_range(0..vocab)).collect();
            let layout = Layout::new(&[&[k, vocab, cout], &[cout]]);
            let r = signed_values(rng, (t - k + 1) * cout);
            let case = FnCase::new(signed_values(rng, layout.len()), move |p| {
                let x = layout.unpack(p);
                let y = conv1d_onehot_forward(&ids, &x[0], &x[1])?;
                let mut gk = Tensor::zeros(x[0].shape());
                let mut gb = Tensor::zeros(x[1].shape());
                conv1d_onehot_backward(&ids, &Tensor::new(y.shape().to_vec(), r.clone())?, &mut gk, &mut gb)?;
                Ok((project(&y, &r), Layout::pack(&[&gk, &gb])))
            });
            max_relative_error(&case, eps)
        }
        LayerCase::MaxPool => {
            let (width, c) = (rng.random_range(1..4), rng.random_range(1..4));
            let t = width * rng.random_range(1..4) + rng.random_range(0..width);
            let r = signed_values(rng, (t / width) * c);
            let case = FnCase::new(distinct_values(rng, t * c), move |p| {
                let x = Tensor::new(vec![t, c], p.to_vec())?;
                let pool = maxpool1d_forward(&x, width)?;
                let g = maxpool1d_backward(
                    &Tensor::new(pool.output.shape().to_vec(), r.clone())?,
                    &pool.argmax,
                    x.shape(),
                );
                Ok((project(&pool.output, &r), g.into_data()))
            });
            max_relative_error(&case, eps)
        }
        LayerCase::SoftmaxCrossEntropy => {
            let n = rng.random_range(2..8);
            let gold = rng.random_range(0..n);
            let case = FnCase::new(signed_values(rng, n), move |p| {
                let probs = softmax(p);
                Ok((cross_entropy(&probs, gold)?, softmax_cross_entropy_grad(&probs, gold)?))
            });
            max_relative_error(&case, eps)
        }
        LayerCase::Lstm => {
            let (steps, h) = (rng.random_range(1..5), rng.random_range(1..4));
            let layout = Layout::new(&[&[steps, 4 * h], &[h, 4 * h], &[4 * h]]);
            let r = signed_values(rng, steps * h);
            let case = FnCase::new(signed_values(rng, layout.len()), move |p| {
                let x = layout.unpack(p);
                let cache = lstm_forward(&x[0], &x[1], &x[2])?;
                let y = cache.outputs().clone();
                let g = lstm_backward(&cache, &x[1], &Tensor::new(y.shape().to_vec(), r.clone())?)?;
                Ok((project(&y, &r), Layout::pack(&[&g.projected, &g.recurrent, &g.bias])))
            });
            max_relative_error(&case, eps)
        }
        LayerCase::BiLstm => {
            let (steps, h) = (rng.random_range(1..5), rng.random_range(1..4));
            let layout = Layout::new(&[
                &[steps, 4 * h],
                &[steps, 4 * h],
                &[h, 4 * h],
                &[4 * h],
                &[h, 4 * h],
                &[4 * h],
            ]);
            let r = signed_values(rng, steps * 2 * h);
            let case = FnCase::new(signed_values(rng, layout.len()), move |p| {
                let x = layout.unpack(p);
                let (y, cache) = bilstm_forward(&x[0], &x[1], (&x[2], &x[3]), (&x[4], &x[5]))?;
                let (f, b) = bilstm_backward(&cache, &x[2], &x[4], &Tensor::new(y.shape().to_vec(), r.clone())?)?;
                Ok((
                    project(&y, &r),
                    Layout::pack(&[&f.projected, &b.projected, &f.recurrent, &f.bias, &b.recurrent, &b.bias]),
                ))
            });
            max_relative_error(&case, eps)
        }
    }
}

/// Maximum relative gradient error of `case` over `trials` random shapes.
pub fn check_layer(case: LayerCase, trials: usize, seed: u64) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        worst = worst.max(one_trial(case, &mut rng)?);
    }
    Ok(worst)
}
