//! Affine layer, ReLU, softmax and cross-entropy.

use super::{shape_err, NnError, Scalar, Tensor};

/// Probabilities are clamped to this floor before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// `input · weight + bias` for an input of shape `[D]` or `[N x D]`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let [d, h] = *weight.shape() else {
        return Err(shape_err(format!(
            "dense weight must be D x H, got {:?}",
            weight.shape()
        )));
    };
    let (n, width) = match *input.shape() {
        [w] => (1, w),
        [n, w] => (n, w),
        _ => {
            return Err(shape_err(format!(
                "dense input must be 1-D or 2-D, got {:?}",
                input.shape()
            )))
        }
    };
    if width != d || bias.len() != h {
        return Err(shape_err(format!(
            "dense input {:?}, weight {:?}, bias {:?} do not conform",
            input.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    let mut out = vec![T::zero(); n * h];
    let (x, w) = (input.data(), weight.data());
    for r in 0..n {
        let row = &mut out[r * h..(r + 1) * h];
        row.copy_from_slice(bias.data());
        for (i, &xv) in x[r * d..(r + 1) * d].iter().enumerate() {
            if xv == T::zero() {
                continue;
            }
            for (acc, &wv) in row.iter_mut().zip(&w[i * h..(i + 1) * h]) {
                *acc += xv * wv;
            }
        }
    }
    let shape = if input.shape().len() == 1 { vec![h] } else { vec![n, h] };
    Tensor::new(shape, out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>, NnError> {
    let [d, h] = *weight.shape() else {
        return Err(shape_err("dense weight must be 2-D"));
    };
    let n = input.len() / d.max(1);
    if input.len() != n * d || grad_out.len() != n * h {
        return Err(shape_err("dense backward shapes do not conform"));
    }
    let mut gi = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[h]);
    let (x, w, g) = (input.data(), weight.data(), grad_out.data());
    for r in 0..n {
        let gr = &g[r * h..(r + 1) * h];
        for (acc, &gv) in gb.data_mut().iter_mut().zip(gr) {
            *acc += gv;
        }
        for i in 0..d {
            let xv = x[r * d + i];
            let wr = &w[i * h..(i + 1) * h];
            let gwr = &mut gw.data_mut()[i * h..(i + 1) * h];
            let mut dx = T::zero();
            for j in 0..h {
                dx += gr[j] * wr[j];
                gwr[j] += gr[j] * xv;
            }
            gi.data_mut()[r * d + i] = dx;
        }
    }
    Ok(DenseGrads {
        input: gi,
        weight: gw,
        bias: gb,
    })
}

pub fn relu_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Gradient through ReLU; the subgradient at 0 is taken as 0.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
        if x <= T::zero() {
            *gv = T::zero();
        }
    }
    g
}

/// Numerically stable softmax (the maximum is subtracted first).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Row-wise softmax of a `[N x L]` tensor.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let mut out = logits.clone();
    for r in 0..logits.rows() {
        let p = softmax(logits.row(r));
        out.row_mut(r).copy_from_slice(&p);
    }
    out
}

/// `-ln p[gold]`, with `p[gold]` clamped below at [`PROB_FLOOR`].
pub fn cross_entropy<T: Scalar>(probs: &[T], gold: usize) -> Result<T, NnError> {
    let p = *probs.get(gold).ok_or(NnError::Index {
        index: gold,
        len: probs.len(),
    })?;
    Ok(-p.max(T::from_f64_lossy(PROB_FLOOR)).ln())
}

/// Gradient of `cross_entropy(softmax(z), gold)` with respect to `z`.
pub fn softmax_cross_entropy_grad<T: Scalar>(probs: &[T], gold: usize) -> Result<Vec<T>, NnError> {
    if gold >= probs.len() {
        return Err(NnError::Index {
            index: gold,
            len: probs.len(),
        });
    }
    let mut g = probs.to_vec();
    g[gold] -= T::one();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn dense_known_values() {
        let x = Tensor::<f64>::from_slice(&[2], &[1., 2.]).unwrap();
        let w = Tensor::from_slice(&[2, 3], &[1., 0., -1., 0.5, 2., 1.]).unwrap();
        let b = Tensor::from_slice(&[3], &[0.1, 0.2, 0.3]).unwrap();
        let y = dense_forward(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), &[3]);
        assert_eq!(y.data(), &[2.1, 4.2, 1.3]);
        assert!(dense_forward(&Tensor::<f64>::zeros(&[3]), &w, &b).is_err());
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let p = softmax(&[0.0f64, 0.0, 0.0]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[1000.0f64, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_values() {
        let ce = cross_entropy(&[0.5f64, 0.5], 0).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(cross_entropy(&[0.5f64, 0.5], 2), Err(NnError::Index { .. })));
        let floor = cross_entropy(&[1.0f64, 0.0], 1).unwrap();
        assert!((floor - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!(softmax_cross_entropy_grad(&[0.5f64], 1).is_err());
    }

    #[test]
    fn relu_masks() {
        let x = Tensor::<f64>::from_slice(&[4], &[-1., 0., 0.5, 2.]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0., 0., 0.5, 2.]);
        let g = relu_backward(&x, &Tensor::from_slice(&[4], &[1., 1., 1., 1.]).unwrap());
        assert_eq!(g.data(), &[0., 0., 1., 1.]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn softmax_is_a_distribution(z in prop::collection::vec(-1000.0f64..1000.0, 1..12)) {
            let p = softmax(&z);
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn relu_shift_round_trip(z in prop::collection::vec(-1000i32..1000, 1..12)) {
            // Small integers are exact in f64, so shifting is lossless.
            let x = Tensor::<f64>::new(vec![z.len()], z.iter().map(|&v| v as f64).collect()).unwrap();
            let back = relu_forward(&x.map(|v| v + 3.0)).map(|v| v - 3.0);
            let direct = relu_forward(&x);
            for ((a, b), &orig) in back.data().iter().zip(direct.data()).zip(x.data()) {
                if orig >= 0.0 { prop_assert_eq!(a, b); }
            }
        }
    }
}
