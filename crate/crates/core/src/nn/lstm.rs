//! LSTM over a sequence, with backpropagation through time.
//!
//! Gate pre-activations are laid out as `[input | forget | candidate | output]`,
//! each `hidden` wide. The recurrent core consumes precomputed input
//! projections so callers can project by matrix product or by table lookup.

use super::{dense_backward, dense_forward, shape_err, NnError, Scalar, Tensor};

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    hidden: usize,
    /// Activated gates per step, `[T x 4H]`.
    gates: Tensor<T>,
    /// Cell states per step, `[T x H]`.
    cells: Tensor<T>,
    /// Hidden outputs per step, `[T x H]`.
    outputs: Tensor<T>,
}

impl<T: Scalar> LstmCache<T> {
    pub fn outputs(&self) -> &Tensor<T> {
        &self.outputs
    }
}

pub struct LstmGrads<T> {
    /// Gradient with respect to the input projections, `[T x 4H]`.
    pub projected: Tensor<T>,
    pub recurrent: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Run the recurrent core from a zero state.
pub fn lstm_forward<T: Scalar>(
    projected: &Tensor<T>,
    recurrent: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<LstmCache<T>, NnError> {
    let [h, four_h] = *recurrent.shape() else {
        return Err(shape_err("recurrent weight must be H x 4H"));
    };
    if four_h != 4 * h || bias.len() != four_h || projected.row_len() != four_h {
        return Err(shape_err(format!(
            "lstm projected {:?}, recurrent {:?}, bias {:?} do not conform",
            projected.shape(),
            recurrent.shape(),
            bias.shape()
        )));
    }
    let steps = projected.rows();
    if steps == 0 {
        return Err(shape_err("lstm input sequence is empty"));
    }
    let mut gates = Tensor::zeros(&[steps, four_h]);
    let mut cells = Tensor::zeros(&[steps, h]);
    let mut outputs = Tensor::zeros(&[steps, h]);
    let w = recurrent.data();
    let mut a = vec![T::zero(); four_h];
    let mut h_prev = vec![T::zero(); h];
    let mut c_prev = vec![T::zero(); h];
    for t in 0..steps {
        for ((acc, &p), &b) in a.iter_mut().zip(projected.row(t)).zip(bias.data()) {
            *acc = p + b;
        }
        for (k, &hv) in h_prev.iter().enumerate() {
            if hv == T::zero() {
                continue;
            }
            for (acc, &wv) in a.iter_mut().zip(&w[k * four_h..(k + 1) * four_h]) {
                *acc += hv * wv;
            }
        }
        let g_row = gates.row_mut(t);
        for j in 0..h {
            g_row[j] = sigmoid(a[j]);
            g_row[h + j] = sigmoid(a[h + j]);
            g_row[2 * h + j] = a[2 * h + j].tanh();
            g_row[3 * h + j] = sigmoid(a[3 * h + j]);
        }
        let g_row = gates.row(t).to_vec();
        for j in 0..h {
            let c = g_row[h + j] * c_prev[j] + g_row[j] * g_row[2 * h + j];
            cells.row_mut(t)[j] = c;
            outputs.row_mut(t)[j] = g_row[3 * h + j] * c.tanh();
        }
        h_prev.copy_from_slice(outputs.row(t));
        c_prev.copy_from_slice(cells.row(t));
    }
    Ok(LstmCache {
        hidden: h,
        gates,
        cells,
        outputs,
    })
}

/// Backpropagation through time given the gradient of every output step.
pub fn lstm_backward<T: Scalar>(
    cache: &LstmCache<T>,
    recurrent: &Tensor<T>,
    grad_outputs: &Tensor<T>,
) -> Result<LstmGrads<T>, NnError> {
    let h = cache.hidden;
    let four_h = 4 * h;
    let steps = cache.outputs.rows();
    if grad_outputs.shape() != cache.outputs.shape() {
        return Err(shape_err("lstm output gradient shape mismatch"));
    }
    let w = recurrent.data();
    let mut g_proj = Tensor::zeros(&[steps, four_h]);
    let mut g_rec = Tensor::zeros(recurrent.shape());
    let mut g_bias = Tensor::zeros(&[four_h]);
    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let one = T::one();
    for t in (0..steps).rev() {
        let gates = cache.gates.row(t);
        let c = cache.cells.row(t);
        let mut da = vec![T::zero(); four_h];
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let c_prev = if t > 0 { cache.cells.row(t - 1)[j] } else { T::zero() };
            let tc = c[j].tanh();
            let dh = grad_outputs.row(t)[j] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o * (one - tc * tc) + dc_next[j];
            da[j] = dc * g * i * (one - i);
            da[h + j] = dc * c_prev * f * (one - f);
            da[2 * h + j] = dc * i * (one - g * g);
            da[3 * h + j] = d_o * o * (one - o);
            dc_next[j] = dc * f;
        }
        g_proj.row_mut(t).copy_from_slice(&da);
        for (acc, &d) in g_bias.data_mut().iter_mut().zip(&da) {
            *acc += d;
        }
        for k in 0..h {
            let h_prev = if t > 0 { cache.outputs.row(t - 1)[k] } else { T::zero() };
            let wr = &w[k * four_h..(k + 1) * four_h];
            let gr = &mut g_rec.data_mut()[k * four_h..(k + 1) * four_h];
            let mut dh = T::zero();
            for j in 0..four_h {
                gr[j] += h_prev * da[j];
                dh += da[j] * wr[j];
            }
            dh_next[k] = dh;
        }
    }
    Ok(LstmGrads {
        projected: g_proj,
        recurrent: g_rec,
        bias: g_bias,
    })
}

/// An LSTM with a dense input projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm<T> {
    /// `[D x 4H]`
    pub input: Tensor<T>,
    /// `[H x 4H]`
    pub recurrent: Tensor<T>,
    /// `[4H]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> Lstm<T> {
    pub fn hidden(&self) -> usize {
        self.recurrent.rows()
    }

    pub fn forward(&self, inputs: &Tensor<T>) -> Result<LstmCache<T>, NnError> {
        let zero_bias = Tensor::zeros(&[self.bias.len()]);
        let projected = dense_forward(inputs, &self.input, &zero_bias)?;
        lstm_forward(&projected, &self.recurrent, &self.bias)
    }

    /// Returns (input gradient, input-weight gradient, core gradients).
    pub fn backward(
        &self,
        inputs: &Tensor<T>,
        cache: &LstmCache<T>,
        grad_outputs: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, LstmGrads<T>), NnError> {
        let core = lstm_backward(cache, &self.recurrent, grad_outputs)?;
        let proj = dense_backward(inputs, &self.input, &core.projected)?;
        Ok((proj.input, proj.weight, core))
    }
}

/// Hidden states of `lstm` over `inputs` (`[T x D]`), from a zero initial state.
pub fn lstm_sequence<T: Scalar>(inputs: &Tensor<T>, lstm: &Lstm<T>) -> Result<Tensor<T>, NnError> {
    Ok(lstm.forward(inputs)?.outputs)
}

fn reverse_rows<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let mut out = t.clone();
    let n = t.rows();
    for r in 0..n {
        out.row_mut(r).copy_from_slice(t.row(n - 1 - r));
    }
    out
}

#[derive(Debug, Clone)]
pub struct BiLstmCache<T> {
    forward: LstmCache<T>,
    /// Cache of the backward pass, in reversed time order.
    backward: LstmCache<T>,
}

/// Run one LSTM left-to-right and another right-to-left and concatenate
/// their per-position outputs into `[T x 2H]`. Both projections are indexed
/// by original position.
pub fn bilstm_forward<T: Scalar>(
    projected_fwd: &Tensor<T>,
    projected_bwd: &Tensor<T>,
    fwd: (&Tensor<T>, &Tensor<T>),
    bwd: (&Tensor<T>, &Tensor<T>),
) -> Result<(Tensor<T>, BiLstmCache<T>), NnError> {
    let f = lstm_forward(projected_fwd, fwd.0, fwd.1)?;
    let b = lstm_forward(&reverse_rows(projected_bwd), bwd.0, bwd.1)?;
    let (steps, h) = (f.outputs.rows(), f.hidden);
    let hb = b.hidden;
    let mut out = Tensor::zeros(&[steps, h + hb]);
    for t in 0..steps {
        let row = out.row_mut(t);
        row[..h].copy_from_slice(f.outputs.row(t));
        row[h..].copy_from_slice(b.outputs.row(steps - 1 - t));
    }
    Ok((
        out,
        BiLstmCache {
            forward: f,
            backward: b,
        },
    ))
}

/// Returns the gradients of the forward and backward LSTMs; projection
/// gradients are in original position order.
pub fn bilstm_backward<T: Scalar>(
    cache: &BiLstmCache<T>,
    fwd_recurrent: &Tensor<T>,
    bwd_recurrent: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(LstmGrads<T>, LstmGrads<T>), NnError> {
    let h = cache.forward.hidden;
    let hb = cache.backward.hidden;
    let steps = grad_out.rows();
    let mut gf = Tensor::zeros(&[steps, h]);
    let mut gb = Tensor::zeros(&[steps, hb]);
    for t in 0..steps {
        let row = grad_out.row(t);
        gf.row_mut(t).copy_from_slice(&row[..h]);
        gb.row_mut(steps - 1 - t).copy_from_slice(&row[h..]);
    }
    let f = lstm_backward(&cache.forward, fwd_recurrent, &gf)?;
    let mut b = lstm_backward(&cache.backward, bwd_recurrent, &gb)?;
    b.projected = reverse_rows(&b.projected);
    Ok((f, b))
}
