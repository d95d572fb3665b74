//! RMSProp parameter updates.

use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

/// Per-parameter RMSProp state: a mean-square accumulator plus the
/// shared coefficients.
#[derive(Clone, Debug)]
pub struct OptimState<F: Real = f32> {
    /// Running mean of squared gradients, same shape as the parameter.
    pub acc: Tensor<F>,
    /// Decay of the accumulator, in (0,1).
    pub rho: F,
    /// Stabilizer added to the root, > 0.
    pub eps: F,
    /// Learning rate, > 0.
    pub lr: F,
}

impl<F: Real> OptimState<F> {
    pub fn new(shape: &[usize], lr: F, rho: F, eps: F) -> Self {
        OptimState {
            acc: Tensor::zeros(shape),
            rho,
            eps,
            lr,
        }
    }
}

/// acc <- rho*acc + (1-rho)*g^2;  param <- param - lr*g/(sqrt(acc)+eps)
///
/// Reads the gradient from the parameter's grad slot.
pub fn rmsprop_update<F: Real>(param: &mut Tensor<F>, state: &mut OptimState<F>) -> Result<()> {
    if state.acc.shape() != param.shape() {
        return Err(TensorError::ShapeMismatch(format!(
            "optimizer state {:?} vs parameter {:?}",
            state.acc.shape(),
            param.shape()
        )));
    }
    let grad = match param.grad() {
        Some(g) => g.to_vec(),
        None => {
            return Err(TensorError::Usage(
                "rmsprop_update called on a parameter without a gradient".into(),
            ))
        }
    };
    let one_minus_rho = F::one() - state.rho;
    let (rho, eps, lr) = (state.rho, state.eps, state.lr);
    for ((p, a), &g) in param
        .data_mut()
        .iter_mut()
        .zip(state.acc.data_mut().iter_mut())
        .zip(grad.iter())
    {
        *a = rho * *a + one_minus_rho * g * g;
        *p = *p - lr * g / (a.sqrt() + eps);
    }
    param.ensure_finite("parameter after rmsprop update")
}
