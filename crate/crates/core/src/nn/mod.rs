//! A small deterministic numeric stack with hand-written backward passes.
//!
//! Every layer is generic over [`Scalar`]: models train in `f32` and the
//! same code runs in `f64` for finite-difference gradient checks.

mod conv;
mod dense;
pub mod gradcheck;
mod init;
mod lstm;
mod optim;
mod pool;
mod tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use thiserror::Error;

pub use conv::{conv1d_backward, conv1d_forward, conv1d_onehot_backward, conv1d_onehot_forward, Conv1dGrads};
pub use dense::{
    cross_entropy, dense_backward, dense_forward, relu_backward, relu_forward, softmax, softmax_cross_entropy_grad,
    softmax_rows, DenseGrads, PROB_FLOOR,
};
pub use init::Initializer;
pub use lstm::{
    bilstm_backward, bilstm_forward, lstm_backward, lstm_forward, lstm_sequence, BiLstmCache, Lstm, LstmCache,
    LstmGrads,
};
pub use optim::{RmsProp, RmsPropConfig};
pub use pool::{maxpool1d_backward, maxpool1d_forward, MaxPool};
pub use tensor::{Parameter, Tensor};

pub trait Scalar: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static {
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
}

pub(crate) fn shape_err(msg: impl Into<String>) -> NnError {
    NnError::Shape(msg.into())
}
