//! Finite-difference checks of the CRF and of whole networks, in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{crf_nll, BiLstm, BiLstmConfig, Cnn, CnnConfig, CrfParams, InputMode, Network};
use crate::nn::gradcheck::{
    check_layer, max_relative_error, signed_values, FnCase, LayerCase, Layout, DEFAULT_EPSILON,
};
use crate::nn::{cross_entropy, softmax_cross_entropy_grad, Initializer, NnError, Parameter, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelCase {
    CrfNll,
    Cnn,
    BiLstmBow,
    BiLstmW2v,
    BiLstmCrf,
}

impl ModelCase {
    pub const ALL: [ModelCase; 5] = [
        ModelCase::CrfNll,
        ModelCase::Cnn,
        ModelCase::BiLstmBow,
        ModelCase::BiLstmW2v,
        ModelCase::BiLstmCrf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelCase::CrfNll => "crf_nll",
            ModelCase::Cnn => "cnn",
            ModelCase::BiLstmBow => "bilstm_bow",
            ModelCase::BiLstmW2v => "bilstm_w2v",
            ModelCase::BiLstmCrf => "bilstm_crf",
        }
    }
}

fn trainable(params: Vec<&Parameter<f64>>) -> Vec<f64> {
    params
        .into_iter()
        .filter(|p| p.trainable)
        .flat_map(|p| p.value.data().iter().copied())
        .collect()
}

fn assign(params: Vec<&mut Parameter<f64>>, flat: &[f64]) {
    let mut at = 0;
    for p in params.into_iter().filter(|p| p.trainable) {
        let n = p.value.len();
        p.value.data_mut().copy_from_slice(&flat[at..at + n]);
        p.zero_grad();
        at += n;
    }
}

fn grads(params: Vec<&Parameter<f64>>) -> Vec<f64> {
    params
        .into_iter()
        .filter(|p| p.trainable)
        .flat_map(|p| p.grad.data().iter().copied())
        .collect()
}

/// Loss and trainable-parameter gradient of a network on one example.
fn network_case(net: Network<f64>, ids: Vec<usize>, gold: Vec<usize>) -> Result<f64, NnError> {
    let start = trainable(net.parameters());
    let case = FnCase::new(start, move |p: &[f64]| {
        let mut net = net.clone();
        assign(net.parameters_mut(), p);
        let loss = match &mut net {
            Network::Cnn(cnn) => {
                let cache = cnn.forward(&ids)?;
                let g = softmax_cross_entropy_grad(&cache.probs, gold[0])?;
                cnn.backward(&cache, &g, 1.0)?;
                cross_entropy(&cache.probs, gold[0])?
            }
            Network::BiLstm(m) => {
                let out = m.forward(&ids)?;
                m.backward(&out, &gold, 1.0)?
            }
        };
        Ok((loss, grads(net.parameters())))
    });
    max_relative_error(&case, DEFAULT_EPSILON)
}

fn one_trial(case: ModelCase, rng: &mut ChaCha8Rng) -> Result<f64, NnError> {
    let seed = rng.random();
    match case {
        ModelCase::CrfNll => {
            let (t, l) = (rng.random_range(1..=5), rng.random_range(2..=5));
            let gold: Vec<usize> = (0..t).map(|_| rng.random_range(0..l)).collect();
            let layout = Layout::new(&[&[t, l], &[l, l], &[l], &[l]]);
            let case = FnCase::new(signed_values(rng, layout.len()), move |p: &[f64]| {
                let x = layout.unpack(p);
                let crf = CrfParams {
                    transitions: x[1].clone(),
                    start: x[2].clone(),
                    stop: x[3].clone(),
                };
                let (nll, g) = crf_nll(&x[0], &crf, &gold)?;
                Ok((nll, Layout::pack(&[&g.emissions, &g.transitions, &g.start, &g.stop])))
            });
            max_relative_error(&case, DEFAULT_EPSILON)
        }
        ModelCase::Cnn => {
            let cfg = CnnConfig {
                channels: 3,
                blocks: 2,
                kernel_width: 2,
                conv_per_block: rng.random_range(1..=2),
                max_len: 12,
                ..CnnConfig::new(6)
            };
            let mut cnn = Cnn::<f64>::new(cfg, seed)?;
            for p in cnn.parameters_mut() {
                let n = p.value.len();
                p.value = Tensor::new(p.value.shape().to_vec(), signed_values(rng, n))?;
            }
            let len = rng.random_range(1..10);
            let ids = (0..len).map(|_| rng.random_range(1..6)).collect();
            network_case(Network::Cnn(cnn), ids, vec![rng.random_range(0..8)])
        }
        ModelCase::BiLstmBow | ModelCase::BiLstmW2v | ModelCase::BiLstmCrf => {
            let mode = if case == ModelCase::BiLstmBow {
                InputMode::Bow
            } else {
                InputMode::W2v
            };
            let mut cfg = BiLstmConfig::new(mode, 6, Some(3), case == ModelCase::BiLstmCrf);
            cfg.hidden = 2;
            cfg.tags = 5;
            let table = (mode == InputMode::W2v).then(|| Initializer::new(seed).uniform(&[6, 3], 1.0));
            let mut m = BiLstm::<f64>::new(cfg, table, seed)?;
            if let Some((t, s, e)) = &mut m.crf {
                for p in [t, s, e] {
                    let n = p.value.len();
                    p.value = Tensor::new(p.value.shape().to_vec(), signed_values(rng, n))?;
                }
            }
            let len = rng.random_range(1..=4);
            let ids = (0..len).map(|_| rng.random_range(1..6)).collect();
            let gold = (0..len).map(|_| rng.random_range(0..5)).collect();
            network_case(Network::BiLstm(m), ids, gold)
        }
    }
}

/// Maximum relative gradient error of `case` over `trials` random instances.
pub fn check_model(case: ModelCase, trials: usize, seed: u64) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        worst = worst.max(one_trial(case, &mut rng)?);
    }
    Ok(worst)
}

/// One row of [`gradient_suite`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub trials: usize,
    pub max_relative_error: f64,
}

/// Every layer case followed by every model case, each over `trials`
/// instances. Case `i` draws from the stream seeded with `seed + i`.
pub fn gradient_suite(trials: usize, seed: u64) -> Result<Vec<CheckResult>, NnError> {
    let layers = LayerCase::ALL.iter().map(|&c| (c.name(), Err(c)));
    let models = ModelCase::ALL.iter().map(|&c| (c.name(), Ok(c)));
    layers
        .chain(models)
        .enumerate()
        .map(|(i, (name, case))| {
            let s = seed.wrapping_add(i as u64);
            let max_relative_error = match case {
                Err(layer) => check_layer(layer, trials, s)?,
                Ok(model) => check_model(model, trials, s)?,
            };
            Ok(CheckResult {
                name,
                trials,
                max_relative_error,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::DEFAULT_TOLERANCE;

    #[test]
    fn every_model_within_tolerance() {
        for case in ModelCase::ALL {
            let err = check_model(case, 10, 77).unwrap();
            assert!(err < DEFAULT_TOLERANCE, "{}: {err:e}", case.name());
        }
    }

    #[test]
    fn suite_covers_layers_and_models() {
        let rows = gradient_suite(2, 5).unwrap();
        assert_eq!(rows.len(), LayerCase::ALL.len() + ModelCase::ALL.len());
        assert!(rows
            .iter()
            .all(|r| r.max_relative_error < DEFAULT_TOLERANCE && r.trials == 2));
    }
}
