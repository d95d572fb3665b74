//! Minimal dense-tensor core for the agent networks: f32 storage,
//! tape-based reverse-mode differentiation over exactly the layers the
//! networks need, and RMSProp. All kernels accumulate in a fixed order
//! so identical seeds give bitwise-identical results; the whole engine
//! is generic over the scalar so tests can shadow it in f64.

pub mod error;
pub mod io;
pub mod kernels;
pub mod ops;
pub mod optim;
pub mod real;
pub mod tape;
pub mod tensor;

pub use error::{FormatError, Result, TensorError};
pub use ops::{
    conv2d_forward, dropout, dropout_mask, linear_forward, lstm_step, lstm_step_batch, relu,
    sigmoid, softmax_rowwise, tanh, LstmParams,
};
pub use optim::{rmsprop_update, OptimState};
pub use real::Real;
pub use tape::{Tape, TensorRef};
pub use tensor::Tensor;
