use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{NnError, Parameter, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.001,
            decay: 0.9,
            epsilon: 1e-7,
        }
    }
}

/// RMSprop: `s <- rho s + (1 - rho) g^2`, `theta <- theta - lr g / (sqrt(s) + eps)`.
#[derive(Debug, Clone)]
pub struct RmsProp<T> {
    config: RmsPropConfig,
    accumulators: HashMap<String, Tensor<T>>,
}

impl<T: Scalar> RmsProp<T> {
    pub fn new(config: RmsPropConfig) -> Self {
        RmsProp {
            config,
            accumulators: HashMap::new(),
        }
    }

    pub fn config(&self) -> &RmsPropConfig {
        &self.config
    }

    pub fn accumulator(&self, name: &str) -> Option<&Tensor<T>> {
        self.accumulators.get(name)
    }

    /// Apply one update to every trainable parameter. Nothing is modified
    /// when any gradient is non-finite.
    pub fn step<'a, I>(&mut self, params: I) -> Result<(), NnError>
    where
        I: IntoIterator<Item = &'a mut Parameter<T>>,
    {
        let params: Vec<&mut Parameter<T>> = params.into_iter().filter(|p| p.trainable).collect();
        if let Some(bad) = params.iter().find(|p| !p.grad.is_finite()) {
            return Err(NnError::Numeric(format!(
                "non-finite gradient in parameter {:?}",
                bad.name
            )));
        }
        let rho = T::from_f64_lossy(self.config.decay);
        let lr = T::from_f64_lossy(self.config.learning_rate);
        let eps = T::from_f64_lossy(self.config.epsilon);
        let one = T::one();
        for p in params {
            let s = self
                .accumulators
                .entry(p.name.clone())
                .or_insert_with(|| Tensor::zeros(p.value.shape()));
            for ((theta, &g), acc) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(s.data_mut()) {
                *acc = rho * *acc + (one - rho) * g * g;
                if g != T::zero() {
                    *theta -= lr * g / (acc.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
