//! Valid (unpadded) 1-D convolution over time.

use super::{shape_err, NnError, Scalar, Tensor};

pub struct Conv1dGrads<T> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

fn kernel_dims<T: Scalar>(kernel: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
    match *kernel.shape() {
        [k, cin, cout] => Ok((k, cin, cout)),
        _ => Err(shape_err(format!(
            "kernel must be K x Cin x Cout, got {:?}",
            kernel.shape()
        ))),
    }
}

/// `out[t, o] = bias[o] + sum_{k, c} input[t + k, c] * kernel[k, c, o]`.
pub fn conv1d_forward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    let (k, cin, cout) = kernel_dims(kernel)?;
    let [t_in, c] = *input.shape() else {
        return Err(shape_err(format!("conv input must be T x C, got {:?}", input.shape())));
    };
    if c != cin || bias.len() != cout {
        return Err(shape_err(format!(
            "conv input {:?}, kernel {:?}, bias {:?} do not conform",
            input.shape(),
            kernel.shape(),
            bias.shape()
        )));
    }
    if t_in < k {
        return Err(shape_err(format!(
            "sequence length {t_in} shorter than kernel width {k}"
        )));
    }
    let t_out = t_in - k + 1;
    let mut out = Tensor::zeros(&[t_out, cout]);
    let (x, w, b) = (input.data(), kernel.data(), bias.data());
    let o = out.data_mut();
    for t in 0..t_out {
        let row = &mut o[t * cout..(t + 1) * cout];
        row.copy_from_slice(b);
        for kk in 0..k {
            let xr = &x[(t + kk) * cin..(t + kk + 1) * cin];
            for (ci, &xv) in xr.iter().enumerate() {
                if xv == T::zero() {
                    continue;
                }
                let wr = &w[(kk * cin + ci) * cout..(kk * cin + ci + 1) * cout];
                for (acc, &wv) in row.iter_mut().zip(wr) {
                    *acc += xv * wv;
                }
            }
        }
    }
    Ok(out)
}

pub fn conv1d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<Conv1dGrads<T>, NnError> {
    let (k, cin, cout) = kernel_dims(kernel)?;
    let t_out = grad_out.rows();
    if input.rows() != t_out + k - 1 || grad_out.row_len() != cout {
        return Err(shape_err("conv backward shapes do not conform"));
    }
    let mut gi = Tensor::zeros(input.shape());
    let mut gk = Tensor::zeros(kernel.shape());
    let mut gb = Tensor::zeros(&[cout]);
    let (x, w, g) = (input.data(), kernel.data(), grad_out.data());
    for t in 0..t_out {
        let gr = &g[t * cout..(t + 1) * cout];
        for (acc, &gv) in gb.data_mut().iter_mut().zip(gr) {
            *acc += gv;
        }
        for kk in 0..k {
            for ci in 0..cin {
                let base = (kk * cin + ci) * cout;
                let xv = x[(t + kk) * cin + ci];
                let wr = &w[base..base + cout];
                let mut dx = T::zero();
                let gkr = &mut gk.data_mut()[base..base + cout];
                for o in 0..cout {
                    dx += gr[o] * wr[o];
                    gkr[o] += gr[o] * xv;
                }
                gi.data_mut()[(t + kk) * cin + ci] += dx;
            }
        }
    }
    Ok(Conv1dGrads {
        input: gi,
        kernel: gk,
        bias: gb,
    })
}

/// Convolution over one-hot token vectors, computed by indexing the kernel.
/// Token id 0 is padding and contributes nothing (an all-zero input column).
pub fn conv1d_onehot_forward<T: Scalar>(
    ids: &[usize],
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    let (k, vocab, cout) = kernel_dims(kernel)?;
    if bias.len() != cout {
        return Err(shape_err("bias does not match kernel output channels"));
    }
    if ids.len() < k {
        return Err(shape_err(format!(
            "sequence length {} shorter than kernel width {k}",
            ids.len()
        )));
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
        return Err(NnError::Index { index: bad, len: vocab });
    }
    let t_out = ids.len() - k + 1;
    let mut out = Tensor::zeros(&[t_out, cout]);
    let w = kernel.data();
    for t in 0..t_out {
        let row = out.row_mut(t);
        row.copy_from_slice(bias.data());
        for kk in 0..k {
            let id = ids[t + kk];
            if id == 0 {
                continue;
            }
            let wr = &w[(kk * vocab + id) * cout..(kk * vocab + id + 1) * cout];
            for (acc, &wv) in row.iter_mut().zip(wr) {
                *acc += wv;
            }
        }
    }
    Ok(out)
}

/// Accumulate kernel and bias gradients of [`conv1d_onehot_forward`].
pub fn conv1d_onehot_backward<T: Scalar>(
    ids: &[usize],
    grad_out: &Tensor<T>,
    grad_kernel: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
) -> Result<(), NnError> {
    let (k, vocab, cout) = kernel_dims(grad_kernel)?;
    let t_out = grad_out.rows();
    if ids.len() != t_out + k - 1 || grad_out.row_len() != cout {
        return Err(shape_err("one-hot conv backward shapes do not conform"));
    }
    let gk = grad_kernel.data_mut();
    for t in 0..t_out {
        let gr = grad_out.row(t);
        for (acc, &g) in grad_bias.data_mut().iter_mut().zip(gr) {
            *acc += g;
        }
        for kk in 0..k {
            let id = ids[t + kk];
            if id == 0 {
                continue;
            }
            let base = (kk * vocab + id) * cout;
            for (acc, &g) in gk[base..base + cout].iter_mut().zip(gr) {
                *acc += g;
            }
        }
    }
    Ok(())
}
