//! Non-overlapping max pooling over time.

use super::{shape_err, NnError, Scalar, Tensor};

/// Pooled output plus, per output cell, the flat input index that won.
pub struct MaxPool<T> {
    pub output: Tensor<T>,
    pub argmax: Vec<usize>,
}

/// Window maximum per channel; ties go to the earliest position. Trailing
/// time steps that do not fill a window are dropped.
pub fn maxpool1d_forward<T: Scalar>(input: &Tensor<T>, width: usize) -> Result<MaxPool<T>, NnError> {
    if width == 0 {
        return Err(shape_err("pool width must be at least 1"));
    }
    let [t_in, c] = *input.shape() else {
        return Err(shape_err(format!("pool input must be T x C, got {:?}", input.shape())));
    };
    if t_in < width {
        return Err(shape_err(format!(
            "sequence length {t_in} shorter than pool width {width}"
        )));
    }
    let t_out = t_in / width;
    let mut out = Tensor::zeros(&[t_out, c]);
    let mut argmax = vec![0usize; t_out * c];
    let x = input.data();
    for t in 0..t_out {
        for ch in 0..c {
            let mut best = t * width * c + ch;
            for w in 1..width {
                let idx = (t * width + w) * c + ch;
                if x[idx] > x[best] {
                    best = idx;
                }
            }
            out.data_mut()[t * c + ch] = x[best];
            argmax[t * c + ch] = best;
        }
    }
    Ok(MaxPool { output: out, argmax })
}

/// Route each output gradient to its stored argmax.
pub fn maxpool1d_backward<T: Scalar>(grad_out: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Tensor<T> {
    let mut g = Tensor::zeros(input_shape);
    for (&idx, &gv) in argmax.iter().zip(grad_out.data()) {
        g.data_mut()[idx] += gv;
    }
    g
}
