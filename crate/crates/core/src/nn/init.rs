use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Scalar, Tensor};

/// Seeded uniform Glorot initializer. Values are drawn in `f64` and then
/// converted, so `f32` and `f64` models built from one seed agree.
#[derive(Debug, Clone)]
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn glorot<T: Scalar>(&mut self, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        self.uniform(shape, limit)
    }

    pub fn uniform<T: Scalar>(&mut self, shape: &[usize], limit: f64) -> Tensor<T> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64_lossy(self.rng.random_range(-limit..=limit)))
            .collect();
        Tensor::new(shape.to_vec(), data).expect("length matches shape")
    }
}
