//! Value-level layer ops: plain forward passes over tensors, no
//! gradient recording. The tape mirrors these through the same kernels;
//! rollout and warm-up forwards come through here.

use crate::error::{Result, TensorError};
use crate::kernels;
use crate::real::Real;
use crate::tensor::Tensor;
use rand::Rng;

/// out[i,j] = sum_k x[i,k] w[k,j] + b[j]
pub fn linear_forward<F: Real>(x: &Tensor<F>, w: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || b.shape() != [ws[1]] {
        return Err(TensorError::ShapeMismatch(format!(
            "linear: x{xs:?} w{ws:?} b{:?}",
            b.shape()
        )));
    }
    let (m, k, n) = (xs[0], xs[1], ws[1]);
    let mut out = vec![F::zero(); m * n];
    for row in out.chunks_exact_mut(n) {
        row.copy_from_slice(b.data());
    }
    kernels::gemm_accum(x.data(), w.data(), m, k, n, &mut out);
    Tensor::new(vec![m, n], out)
}

/// Valid-padding cross-correlation of a single image x[C,H,W] with
/// kernels[Cout,C,kh,kw] plus per-channel bias. Output [Cout,OH,OW].
pub fn conv2d_forward<F: Real>(
    x: &Tensor<F>,
    kernels_t: &Tensor<F>,
    bias: &Tensor<F>,
    stride: usize,
) -> Result<Tensor<F>> {
    let xs = x.shape();
    let ks = kernels_t.shape();
    if xs.len() != 3 || ks.len() != 4 || ks[1] != xs[0] || bias.shape() != [ks[0]] {
        return Err(TensorError::ShapeMismatch(format!(
            "conv2d: x{xs:?} kernels{ks:?} bias{:?}",
            bias.shape()
        )));
    }
    let (c_in, h, w) = (xs[0], xs[1], xs[2]);
    let (c_out, kh, kw) = (ks[0], ks[2], ks[3]);
    if kh > h || kw > w || stride == 0 {
        return Err(TensorError::ShapeMismatch(format!(
            "conv2d: kernel {kh}x{kw} stride {stride} does not fit input {h}x{w}"
        )));
    }
    let oh = kernels::conv_out_extent(h, kh, stride);
    let ow = kernels::conv_out_extent(w, kw, stride);
    let p = oh * ow;
    let kdim = c_in * kh * kw;
    let mut col = vec![F::zero(); kdim * p];
    kernels::im2col(x.data(), c_in, h, w, kh, kw, stride, &mut col);
    let mut out = vec![F::zero(); c_out * p];
    for (co, row) in out.chunks_exact_mut(p).enumerate() {
        let bv = bias.data()[co];
        row.iter_mut().for_each(|v| *v = bv);
    }
    kernels::gemm_accum(kernels_t.data(), &col, c_out, kdim, p, &mut out);
    Tensor::new(vec![c_out, oh, ow], out)
}

/// LSTM cell parameters. Gate order along the packed axis is
/// input, forget, candidate, output.
#[derive(Clone, Debug)]
pub struct LstmParams<F: Real = f32> {
    /// [in, 4*hid]
    pub wx: Tensor<F>,
    /// [hid, 4*hid]
    pub wh: Tensor<F>,
    /// [4*hid]
    pub bias: Tensor<F>,
}

impl<F: Real> LstmParams<F> {
    pub fn hidden(&self) -> usize {
        self.wh.shape()[0]
    }

    pub fn input(&self) -> usize {
        self.wx.shape()[0]
    }

    fn check(&self) -> Result<()> {
        let hid = self.hidden();
        if self.wx.shape()[1] != 4 * hid
            || self.wh.shape() != [hid, 4 * hid]
            || self.bias.shape() != [4 * hid]
        {
            return Err(TensorError::ShapeMismatch(format!(
                "lstm params: wx{:?} wh{:?} b{:?}",
                self.wx.shape(),
                self.wh.shape(),
                self.bias.shape()
            )));
        }
        Ok(())
    }
}

/// One LSTM step for a batch of rows: x[B,in], h[B,hid], c[B,hid].
pub fn lstm_step_batch<F: Real>(
    x: &Tensor<F>,
    h_prev: &Tensor<F>,
    c_prev: &Tensor<F>,
    params: &LstmParams<F>,
) -> Result<(Tensor<F>, Tensor<F>)> {
    params.check()?;
    let hid = params.hidden();
    let b = x.shape()[0];
    if x.shape().len() != 2
        || x.shape()[1] != params.input()
        || h_prev.shape() != [b, hid]
        || c_prev.shape() != [b, hid]
    {
        return Err(TensorError::ShapeMismatch(format!(
            "lstm step: x{:?} h{:?} c{:?}",
            x.shape(),
            h_prev.shape(),
            c_prev.shape()
        )));
    }
    let g4 = 4 * hid;
    let mut z = vec![F::zero(); b * g4];
    for row in z.chunks_exact_mut(g4) {
        row.copy_from_slice(params.bias.data());
    }
    kernels::gemm_accum(x.data(), params.wx.data(), b, params.input(), g4, &mut z);
    kernels::gemm_accum(h_prev.data(), params.wh.data(), b, hid, g4, &mut z);

    let mut h = vec![F::zero(); b * hid];
    let mut c = vec![F::zero(); b * hid];
    for bi in 0..b {
        let zr = &z[bi * g4..(bi + 1) * g4];
        for u in 0..hid {
            let i = sigmoid_s(zr[u]);
            let f = sigmoid_s(zr[hid + u]);
            let g = zr[2 * hid + u].tanh();
            let o = sigmoid_s(zr[3 * hid + u]);
            let cv = f * c_prev.data()[bi * hid + u] + i * g;
            c[bi * hid + u] = cv;
            h[bi * hid + u] = o * cv.tanh();
        }
    }
    Ok((Tensor::new(vec![b, hid], h)?, Tensor::new(vec![b, hid], c)?))
}

/// Single-row convenience form: x[in], h[hid], c[hid].
pub fn lstm_step<F: Real>(
    x: &Tensor<F>,
    h_prev: &Tensor<F>,
    c_prev: &Tensor<F>,
    params: &LstmParams<F>,
) -> Result<(Tensor<F>, Tensor<F>)> {
    let n_in = x.numel();
    let hid = h_prev.numel();
    let xb = x.clone().reshaped(&[1, n_in])?;
    let hb = h_prev.clone().reshaped(&[1, hid])?;
    let cb = c_prev.clone().reshaped(&[1, hid])?;
    let (h, c) = lstm_step_batch(&xb, &hb, &cb, params)?;
    Ok((h.reshaped(&[hid])?, c.reshaped(&[hid])?))
}

#[inline]
pub(crate) fn sigmoid_s<F: Real>(v: F) -> F {
    F::one() / (F::one() + (-v).exp())
}

pub fn relu<F: Real>(x: &Tensor<F>) -> Tensor<F> {
    x.map(|v| if v > F::zero() { v } else { F::zero() })
}

pub fn sigmoid<F: Real>(x: &Tensor<F>) -> Tensor<F> {
    x.map(sigmoid_s)
}

pub fn tanh<F: Real>(x: &Tensor<F>) -> Tensor<F> {
    x.map(|v| v.tanh())
}

/// Row-wise softmax over the last axis of a 2-d tensor (or a single row).
pub fn softmax_rowwise<F: Real>(x: &Tensor<F>) -> Result<Tensor<F>> {
    let (rows, cols) = match x.shape() {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        s => {
            return Err(TensorError::ShapeMismatch(format!(
                "softmax expects 1-d or 2-d, got {s:?}"
            )))
        }
    };
    let mut out = vec![F::zero(); rows * cols];
    for r in 0..rows {
        let src = &x.data()[r * cols..(r + 1) * cols];
        let dst = &mut out[r * cols..(r + 1) * cols];
        let mut mx = src[0];
        for &v in src.iter() {
            if v > mx {
                mx = v;
            }
        }
        let mut denom = F::zero();
        for (d, &v) in dst.iter_mut().zip(src.iter()) {
            *d = (v - mx).exp();
            denom = denom + *d;
        }
        for d in dst.iter_mut() {
            *d = *d / denom;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Inverted-dropout mask: entries are either 0 or 1/(1-rate).
pub fn dropout_mask<F: Real>(len: usize, rate: f32, rng: &mut impl Rng) -> Vec<F> {
    debug_assert!((0.0..1.0).contains(&rate));
    let keep_scale = F::from_f64c(1.0 / (1.0 - rate as f64));
    (0..len)
        .map(|_| {
            if rng.gen::<f32>() < rate {
                F::zero()
            } else {
                keep_scale
            }
        })
        .collect()
}

/// Inverted dropout: train mode zeroes entries with probability `rate`
/// and rescales survivors; eval mode is the identity.
pub fn dropout<F: Real>(
    x: &Tensor<F>,
    rate: f32,
    rng: &mut impl Rng,
    train_mode: bool,
) -> Tensor<F> {
    if !train_mode || rate == 0.0 {
        return x.clone();
    }
    let mask = dropout_mask::<F>(x.numel(), rate, rng);
    let data = x
        .data()
        .iter()
        .zip(mask.iter())
        .map(|(&v, &m)| v * m)
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f32]) -> Tensor<f32> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn linear_identity_weight_passes_input_through() {
        let x = t(&[1, 2], &[1.0, 2.0]);
        let w = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let b = t(&[2], &[0.0, 0.0]);
        assert_eq!(linear_forward(&x, &w, &b).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn linear_zero_input_returns_bias() {
        let x = t(&[1, 2], &[0.0, 0.0]);
        let w = t(&[2, 2], &[4.0, -3.0, 2.5, 9.0]);
        let b = t(&[2], &[3.0, -1.0]);
        assert_eq!(linear_forward(&x, &w, &b).unwrap().data(), &[3.0, -1.0]);
    }

    #[test]
    fn linear_matches_hand_multiply() {
        // oracle: [[1,2],[3,4]] @ [[1,1],[1,1]] = [[3,3],[7,7]]
        let x = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let w = t(&[2, 2], &[1.0, 1.0, 1.0, 1.0]);
        let b = t(&[2], &[0.0, 0.0]);
        assert_eq!(
            linear_forward(&x, &w, &b).unwrap().data(),
            &[3.0, 3.0, 7.0, 7.0]
        );
    }

    #[test]
    fn linear_rejects_shape_mismatch() {
        let x = t(&[1, 3], &[0.0; 3]);
        let w = t(&[2, 2], &[0.0; 4]);
        let b = t(&[2], &[0.0; 2]);
        assert!(linear_forward(&x, &w, &b).is_err());
    }

    #[test]
    fn conv_scalar_kernel_scales() {
        let x = Tensor::full(&[1, 3, 3], 1.0f32);
        let k = t(&[1, 1, 1, 1], &[2.0]);
        let b = t(&[1], &[0.0]);
        let out = conv2d_forward(&x, &k, &b, 1).unwrap();
        assert_eq!(out.shape(), &[1, 3, 3]);
        assert!(out.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn conv_sum_kernel_sums_window() {
        let x = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let k = Tensor::full(&[1, 1, 2, 2], 1.0f32);
        let b = t(&[1], &[0.0]);
        let out = conv2d_forward(&x, &k, &b, 1).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[10.0]);
    }

    #[test]
    fn conv_zero_kernels_bias_only() {
        let x = t(&[1, 3, 4], &[0.5; 12]);
        let k = Tensor::zeros(&[1, 1, 2, 2]);
        let b = t(&[1], &[5.0]);
        let out = conv2d_forward(&x, &k, &b, 1).unwrap();
        assert!(out.data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn conv_kernel_larger_than_input_errors() {
        let x = Tensor::<f32>::zeros(&[1, 2, 2]);
        let k = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        let b = Tensor::<f32>::zeros(&[1]);
        assert!(conv2d_forward(&x, &k, &b, 1).is_err());
    }

    fn zero_lstm(n_in: usize, hid: usize) -> LstmParams<f32> {
        LstmParams {
            wx: Tensor::zeros(&[n_in, 4 * hid]),
            wh: Tensor::zeros(&[hid, 4 * hid]),
            bias: Tensor::zeros(&[4 * hid]),
        }
    }

    #[test]
    fn lstm_zero_params_halves_cell() {
        // all gates sigmoid(0)=0.5, candidate tanh(0)=0:
        // c = 0.5*c_prev, h = 0.5*tanh(0.5*c_prev)
        let p = zero_lstm(3, 2);
        let x = t(&[3], &[0.3, -0.7, 2.0]);
        let h0 = t(&[2], &[0.0, 0.0]);
        let c0 = t(&[2], &[1.0, -2.0]);
        let (h, c) = lstm_step(&x, &h0, &c0, &p).unwrap();
        assert!((c.data()[0] - 0.5).abs() < 1e-6);
        assert!((c.data()[1] + 1.0).abs() < 1e-6);
        assert!((h.data()[0] - 0.5 * 0.5f32.tanh()).abs() < 1e-6);
        assert!((h.data()[1] - 0.5 * (-1.0f32).tanh()).abs() < 1e-6);
    }

    #[test]
    fn lstm_saturated_forget_gate_preserves_cell() {
        let hid = 1;
        let mut p = zero_lstm(2, hid);
        p.bias.data_mut()[hid] = 100.0; // forget gate saturates at 1
        let x = t(&[2], &[0.0, 0.0]);
        let h0 = t(&[1], &[0.0]);
        let c0 = t(&[1], &[1.0]);
        let (_, c) = lstm_step(&x, &h0, &c0, &p).unwrap();
        assert!((c.data()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lstm_matches_scalar_reference() {
        // independent scalar oracle: hidden 1, input 1, hand-set weights
        let p = LstmParams {
            wx: t(&[1, 4], &[0.5, -0.3, 0.8, 0.1]),
            wh: t(&[1, 4], &[0.2, 0.4, -0.5, 0.7]),
            bias: t(&[4], &[0.01, -0.02, 0.03, -0.04]),
        };
        let (x, h0, c0) = (0.9f64, -0.4f64, 0.6f64);
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let zi = 0.5 * x + 0.2 * h0 + 0.01;
        let zf = -0.3 * x + 0.4 * h0 - 0.02;
        let zg = 0.8 * x - 0.5 * h0 + 0.03;
        let zo = 0.1 * x + 0.7 * h0 - 0.04;
        let c_ref = sig(zf) * c0 + sig(zi) * zg.tanh();
        let h_ref = sig(zo) * c_ref.tanh();

        let (h, c) = lstm_step(
            &t(&[1], &[x as f32]),
            &t(&[1], &[h0 as f32]),
            &t(&[1], &[c0 as f32]),
            &p,
        )
        .unwrap();
        assert!((c.data()[0] as f64 - c_ref).abs() < 1e-6);
        assert!((h.data()[0] as f64 - h_ref).abs() < 1e-6);
    }

    #[test]
    fn activation_examples() {
        let x = t(&[3], &[-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(sigmoid(&t(&[1], &[0.0])).data(), &[0.5]);
        let sm = softmax_rowwise(&t(&[2], &[0.0, 0.0])).unwrap();
        assert_eq!(sm.data(), &[0.5, 0.5]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = t(&[4], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).data(), x.data());
        assert_eq!(dropout(&x, 0.5, &mut rng, false).data(), x.data());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::full(&[100_000], 1.0f32);
        let y = dropout(&x, 0.5, &mut rng, true);
        let mean = y.data().iter().sum::<f32>() / y.numel() as f32;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }
}
