//! Linear-chain CRF over emission scores.

use crate::nn::{NnError, Scalar, Tensor};

/// `transitions[i][j]` scores tag `j` following tag `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams<T> {
    pub transitions: Tensor<T>,
    pub start: Tensor<T>,
    pub stop: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfGrads<T> {
    pub emissions: Tensor<T>,
    pub transitions: Tensor<T>,
    pub start: Tensor<T>,
    pub stop: Tensor<T>,
}

impl<T: Scalar> CrfParams<T> {
    pub fn zeros(labels: usize) -> Self {
        CrfParams {
            transitions: Tensor::zeros(&[labels, labels]),
            start: Tensor::zeros(&[labels]),
            stop: Tensor::zeros(&[labels]),
        }
    }

    pub fn labels(&self) -> usize {
        self.start.len()
    }

    fn trans(&self, i: usize, j: usize) -> T {
        self.transitions.data()[i * self.labels() + j]
    }
}

fn check<T: Scalar>(emissions: &Tensor<T>, crf: &CrfParams<T>) -> Result<(usize, usize), NnError> {
    let l = crf.labels();
    if crf.transitions.shape() != [l, l] || crf.stop.len() != l {
        return Err(NnError::Shape("crf parameters do not conform".into()));
    }
    let [t, el] = *emissions.shape() else {
        return Err(NnError::Shape("emissions must be T x L".into()));
    };
    if el != l {
        return Err(NnError::Shape(format!("emissions have {el} labels, crf has {l}")));
    }
    if t == 0 {
        return Err(NnError::Shape("crf needs at least one time step".into()));
    }
    emissions.ensure_finite("crf emissions")?;
    Ok((t, l))
}

fn logsumexp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

/// Forward log-scores `alpha[t][j]`, excluding the stop score.
fn forward<T: Scalar>(emissions: &Tensor<T>, crf: &CrfParams<T>, steps: usize, l: usize) -> Vec<Vec<T>> {
    let mut alpha = vec![vec![T::zero(); l]; steps];
    for j in 0..l {
        alpha[0][j] = crf.start.data()[j] + emissions.row(0)[j];
    }
    let mut buf = vec![T::zero(); l];
    for t in 1..steps {
        for j in 0..l {
            for i in 0..l {
                buf[i] = alpha[t - 1][i] + crf.trans(i, j);
            }
            alpha[t][j] = logsumexp(&buf) + emissions.row(t)[j];
        }
    }
    alpha
}

fn backward<T: Scalar>(emissions: &Tensor<T>, crf: &CrfParams<T>, steps: usize, l: usize) -> Vec<Vec<T>> {
    let mut beta = vec![vec![T::zero(); l]; steps];
    beta[steps - 1].copy_from_slice(crf.stop.data());
    let mut buf = vec![T::zero(); l];
    for t in (0..steps - 1).rev() {
        for i in 0..l {
            for j in 0..l {
                buf[j] = crf.trans(i, j) + emissions.row(t + 1)[j] + beta[t + 1][j];
            }
            beta[t][i] = logsumexp(&buf);
        }
    }
    beta
}

/// `log sum_paths exp(start + emissions + transitions + stop)`.
pub fn crf_log_partition<T: Scalar>(emissions: &Tensor<T>, crf: &CrfParams<T>) -> Result<T, NnError> {
    let (steps, l) = check(emissions, crf)?;
    let alpha = forward(emissions, crf, steps, l);
    let last: Vec<T> = (0..l).map(|j| alpha[steps - 1][j] + crf.stop.data()[j]).collect();
    Ok(logsumexp(&last))
}

pub fn crf_path_score<T: Scalar>(emissions: &Tensor<T>, crf: &CrfParams<T>, path: &[usize]) -> Result<T, NnError> {
    let (steps, l) = check(emissions, crf)?;
    if path.len() != steps {
        return Err(NnError::Shape(format!("path length {} for {steps} steps", path.len())));
    }
    if let Some(&bad) = path.iter().find(|&&p| p >= l) {
        return Err(NnError::Index { index: bad, len: l });
    }
    let mut s = crf.start.data()[path[0]] + crf.stop.data()[path[steps - 1]];
    for (t, &p) in path.iter().enumerate() {
        s += emissions.row(t)[p];
        if t > 0 {
            s += crf.trans(path[t - 1], p);
        }
    }
    Ok(s)
}

/// Negative log-likelihood of `gold` and its gradients.
pub fn crf_nll<T: Scalar>(
    emissions: &Tensor<T>,
    crf: &CrfParams<T>,
    gold: &[usize],
) -> Result<(T, CrfGrads<T>), NnError> {
    let score = crf_path_score(emissions, crf, gold)?;
    let (steps, l) = check(emissions, crf)?;
    let alpha = forward(emissions, crf, steps, l);
    let beta = backward(emissions, crf, steps, l);
    let last: Vec<T> = (0..l).map(|j| alpha[steps - 1][j] + crf.stop.data()[j]).collect();
    let log_z = logsumexp(&last);

    let mut g_em = Tensor::zeros(&[steps, l]);
    let mut g_tr = Tensor::zeros(&[l, l]);
    let mut g_start = Tensor::zeros(&[l]);
    let mut g_stop = Tensor::zeros(&[l]);
    for t in 0..steps {
        for j in 0..l {
            let p = (alpha[t][j] + beta[t][j] - log_z).exp();
            g_em.row_mut(t)[j] = p;
            if t == 0 {
                g_start.data_mut()[j] = p;
            }
            if t == steps - 1 {
                g_stop.data_mut()[j] = p;
            }
        }
        if t > 0 {
            for i in 0..l {
                for j in 0..l {
                    let p = (alpha[t - 1][i] + crf.trans(i, j) + emissions.row(t)[j] + beta[t][j] - log_z).exp();
                    g_tr.data_mut()[i * l + j] += p;
                }
            }
        }
    }
    for (t, &y) in gold.iter().enumerate() {
        g_em.row_mut(t)[y] -= T::one();
        if t > 0 {
            g_tr.data_mut()[gold[t - 1] * l + y] -= T::one();
        }
    }
    g_start.data_mut()[gold[0]] -= T::one();
    g_stop.data_mut()[gold[steps - 1]] -= T::one();
    let nll = (log_z - score).max(T::zero());
    Ok((
        nll,
        CrfGrads {
            emissions: g_em,
            transitions: g_tr,
            start: g_start,
            stop: g_stop,
        },
    ))
}

/// Viterbi path. Equal scores resolve to the lower tag index, both for the
/// final tag and at every backpointer.
pub fn crf_decode<T: Scalar>(emissions: &Tensor<T>, crf: &CrfParams<T>) -> Result<Vec<usize>, NnError> {
    let (steps, l) = check(emissions, crf)?;
    let mut delta: Vec<T> = (0..l).map(|j| crf.start.data()[j] + emissions.row(0)[j]).collect();
    let mut back = vec![vec![0usize; l]; steps];
    for t in 1..steps {
        let mut next = vec![T::zero(); l];
        for j in 0..l {
            let mut best = 0;
            for i in 1..l {
                if delta[i] + crf.trans(i, j) > delta[best] + crf.trans(best, j) {
                    best = i;
                }
            }
            back[t][j] = best;
            next[j] = delta[best] + crf.trans(best, j) + emissions.row(t)[j];
        }
        delta = next;
    }
    let mut last = 0;
    for j in 1..l {
        if delta[j] + crf.stop.data()[j] > delta[last] + crf.stop.data()[last] {
            last = j;
        }
    }
    let mut path = vec![last; steps];
    for t in (1..steps).rev() {
        path[t - 1] = back[t][path[t]];
    }
    Ok(path)
}
