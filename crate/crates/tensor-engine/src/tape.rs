//! Reverse-mode differentiation over a per-update computation trace.
//!
//! A `Tape` records forward ops into a linear list of nodes and replays
//! them backward to accumulate gradients into parameter leaves. The
//! trace is rebuilt every forward pass and is confined to one thread
//! for its forward+backward lifetime.

use crate::error::{Result, TensorError};
use crate::kernels;
use crate::ops::sigmoid_s;
use crate::real::Real;
use crate::tensor::Tensor;

/// Handle to a node on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorRef(usize);

enum Op<F: Real> {
    /// Constant input, no gradient.
    Leaf,
    /// Trainable input, receives gradient.
    Param,
    /// a[m,k] @ b[k,n]
    Matmul { a: TensorRef, b: TensorRef },
    /// x[m,n] + bias[n] broadcast over rows
    BiasAddRows { x: TensorRef, b: TensorRef },
    /// x[B,C,H,W] * kernels[Cout,C,kh,kw] + bias, valid padding.
    /// `cols` caches the per-sample im2col expansion for backward.
    Conv2dBatch {
        x: TensorRef,
        k: TensorRef,
        b: TensorRef,
        stride: usize,
        cols: Vec<F>,
    },
    Relu { x: TensorRef },
    Sigmoid { x: TensorRef },
    Tanh { x: TensorRef },
    SoftmaxRows { x: TensorRef },
    Add { a: TensorRef, b: TensorRef },
    Sub { a: TensorRef, b: TensorRef },
    Mul { a: TensorRef, b: TensorRef },
    Scale { x: TensorRef, c: F },
    /// Elementwise product with a fixed mask (dropout).
    MulMask { x: TensorRef, mask: Vec<F> },
    /// Column range [from, to) of a 2-d tensor.
    SliceCols { x: TensorRef, from: usize, to: usize },
    /// out[i] = x[i, idx[i]]
    GatherCols { x: TensorRef, idx: Vec<usize> },
    Square { x: TensorRef },
    SumAll { x: TensorRef },
    Reshape { x: TensorRef },
    /// Elementwise binary cross-entropy on logits against constant
    /// targets: max(z,0) - z*t + ln(1+e^{-|z|}).
    BceFromLogits { z: TensorRef, targets: Vec<F> },
}

struct Node<F: Real> {
    value: Tensor<F>,
    grad: Option<Vec<F>>,
    needs_grad: bool,
    op: Op<F>,
}

pub struct Tape<F: Real = f32> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<F>, needs_grad: bool, op: Op<F>) -> TensorRef {
        self.nodes.push(Node {
            value,
            grad: None,
            needs_grad,
            op,
        });
        TensorRef(self.nodes.len() - 1)
    }

    fn needs(&self, r: TensorRef) -> bool {
        self.nodes[r.0].needs_grad
    }

    pub fn value(&self, r: TensorRef) -> &Tensor<F> {
        &self.nodes[r.0].value
    }

    /// Constant input; gradient never flows into it.
    pub fn leaf(&mut self, t: Tensor<F>) -> TensorRef {
        self.push(t, false, Op::Leaf)
    }

    /// Trainable input; `grad_of` is populated after `backward`.
    pub fn param(&mut self, t: &Tensor<F>) -> TensorRef {
        self.push(t.clone(), true, Op::Param)
    }

    pub fn matmul(&mut self, a: TensorRef, b: TensorRef) -> TensorRef {
        let (asha, bsha) = (self.value(a).shape(), self.value(b).shape());
        assert!(
            asha.len() == 2 && bsha.len() == 2 && asha[1] == bsha[0],
            "matmul shapes {asha:?} x {bsha:?}"
        );
        let (m, k, n) = (asha[0], asha[1], bsha[1]);
        let mut out = vec![F::zero(); m * n];
        kernels::gemm_accum(self.value(a).data(), self.value(b).data(), m, k, n, &mut out);
        let ng = self.needs(a) || self.needs(b);
        self.push(
            Tensor::new(vec![m, n], out).expect("matmul shape"),
            ng,
            Op::Matmul { a, b },
        )
    }

    pub fn bias_add_rows(&mut self, x: TensorRef, b: TensorRef) -> TensorRef {
        let xs = self.value(x).shape().to_vec();
        let n = *xs.last().expect("non-scalar");
        assert_eq!(self.value(b).shape(), [n], "bias width");
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_exact_mut(n) {
            for (o, &bv) in row.iter_mut().zip(self.value(b).data()) {
                *o = *o + bv;
            }
        }
        let ng = self.needs(x) || self.needs(b);
        self.push(
            Tensor::new(xs, out).expect("bias shape"),
            ng,
            Op::BiasAddRows { x, b },
        )
    }

    pub fn conv2d_batch(
        &mut self,
        x: TensorRef,
        k: TensorRef,
        b: TensorRef,
        stride: usize,
    ) -> TensorRef {
        let xs = self.value(x).shape().to_vec();
        let ks = self.value(k).shape().to_vec();
        assert!(
            xs.len() == 4 && ks.len() == 4 && ks[1] == xs[1],
            "conv shapes x{xs:?} k{ks:?}"
        );
        let (bsz, c_in, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (c_out, kh, kw) = (ks[0], ks[2], ks[3]);
        assert!(kh <= h && kw <= w && stride > 0, "kernel fits input");
        assert_eq!(self.value(b).shape(), [c_out], "conv bias");
        let oh = kernels::conv_out_extent(h, kh, stride);
        let ow = kernels::conv_out_extent(w, kw, stride);
        let p = oh * ow;
        let kdim = c_in * kh * kw;
        let mut cols = vec![F::zero(); bsz * kdim * p];
        let mut out = vec![F::zero(); bsz * c_out * p];
        for s in 0..bsz {
            let col = &mut cols[s * kdim * p..(s + 1) * kdim * p];
            kernels::im2col(
                &self.value(x).data()[s * c_in * h * w..(s + 1) * c_in * h * w],
                c_in,
                h,
                w,
                kh,
                kw,
                stride,
                col,
            );
        }
        for s in 0..bsz {
            let o = &mut out[s * c_out * p..(s + 1) * c_out * p];
            for (co, row) in o.chunks_exact_mut(p).enumerate() {
                let bv = self.value(b).data()[co];
                row.iter_mut().for_each(|v| *v = bv);
            }
            kernels::gemm_accum(
                self.value(k).data(),
                &cols[s * kdim * p..(s + 1) * kdim * p],
                c_out,
                kdim,
                p,
                o,
            );
        }
        let ng = self.needs(x) || self.needs(k) || self.needs(b);
        self.push(
            Tensor::new(vec![bsz, c_out, oh, ow], out).expect("conv shape"),
            ng,
            Op::Conv2dBatch {
                x,
                k,
                b,
                stride,
                cols,
            },
        )
    }

    pub fn relu(&mut self, x: TensorRef) -> TensorRef {
        let v = self.value(x).map(|v| if v > F::zero() { v } else { F::zero() });
        let ng = self.needs(x);
        self.push(v, ng, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: TensorRef) -> TensorRef {
        let v = self.value(x).map(sigmoid_s);
        let ng = self.needs(x);
        self.push(v, ng, Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: TensorRef) -> TensorRef {
        let v = self.value(x).map(|v| v.tanh());
        let ng = self.needs(x);
        self.push(v, ng, Op::Tanh { x })
    }

    pub fn softmax_rows(&mut self, x: TensorRef) -> TensorRef {
        let v = crate::ops::softmax_rowwise(self.value(x)).expect("softmax shape");
        let ng = self.needs(x);
        self.push(v, ng, Op::SoftmaxRows { x })
    }

    fn binary_elementwise(
        &mut self,
        a: TensorRef,
        b: TensorRef,
        f: impl Fn(F, F) -> F,
        op: Op<F>,
    ) -> TensorRef {
        assert_eq!(
            self.value(a).shape(),
            self.value(b).shape(),
            "elementwise shapes"
        );
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.value(a).shape().to_vec();
        let ng = self.needs(a) || self.needs(b);
        self.push(Tensor::new(shape, data).expect("same shape"), ng, op)
    }

    pub fn add(&mut self, a: TensorRef, b: TensorRef) -> TensorRef {
        self.binary_elementwise(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: TensorRef, b: TensorRef) -> TensorRef {
        self.binary_elementwise(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: TensorRef, b: TensorRef) -> TensorRef {
        self.binary_elementwise(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: TensorRef, c: F) -> TensorRef {
        let v = self.value(x).map(|v| v * c);
        let ng = self.needs(x);
        self.push(v, ng, Op::Scale { x, c })
    }

    /// Apply a fixed dropout mask (entries 0 or 1/(1-rate)).
    pub fn mul_mask(&mut self, x: TensorRef, mask: Vec<F>) -> TensorRef {
        assert_eq!(mask.len(), self.value(x).numel(), "mask length");
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(mask.iter())
            .map(|(&v, &m)| v * m)
            .collect();
        let shape = self.value(x).shape().to_vec();
        let ng = self.needs(x);
        self.push(
            Tensor::new(shape, data).expect("same shape"),
            ng,
            Op::MulMask { x, mask },
        )
    }

    pub fn slice_cols(&mut self, x: TensorRef, from: usize, to: usize) -> TensorRef {
        let xs = self.value(x).shape();
        assert!(xs.len() == 2 && from < to && to <= xs[1], "slice range");
        let (rows, cols) = (xs[0], xs[1]);
        let width = to - from;
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&self.value(x).data()[r * cols + from..r * cols + to]);
        }
        let ng = self.needs(x);
        self.push(
            Tensor::new(vec![rows, width], data).expect("slice shape"),
            ng,
            Op::SliceCols { x, from, to },
        )
    }

    pub fn gather_cols(&mut self, x: TensorRef, idx: Vec<usize>) -> TensorRef {
        let xs = self.value(x).shape();
        assert!(xs.len() == 2 && idx.len() == xs[0], "gather index length");
        let cols = xs[1];
        assert!(idx.iter().all(|&j| j < cols), "gather index range");
        let data: Vec<F> = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| self.value(x).data()[i * cols + j])
            .collect();
        let rows = xs[0];
        let ng = self.needs(x);
        self.push(
            Tensor::new(vec![rows], data).expect("gather shape"),
            ng,
            Op::GatherCols { x, idx },
        )
    }

    pub fn square(&mut self, x: TensorRef) -> TensorRef {
        let v = self.value(x).map(|v| v * v);
        let ng = self.needs(x);
        self.push(v, ng, Op::Square { x })
    }

    pub fn sum_all(&mut self, x: TensorRef) -> TensorRef {
        let s = kernels::sum(self.value(x).data());
        let ng = self.needs(x);
        self.push(Tensor::scalar(s), ng, Op::SumAll { x })
    }

    pub fn reshape(&mut self, x: TensorRef, shape: &[usize]) -> TensorRef {
        let v = self
            .value(x)
            .clone()
            .reshaped(shape)
            .expect("reshape element count");
        let ng = self.needs(x);
        self.push(v, ng, Op::Reshape { x })
    }

    pub fn bce_from_logits(&mut self, z: TensorRef, targets: Vec<F>) -> TensorRef {
        assert_eq!(targets.len(), self.value(z).numel(), "target length");
        let data: Vec<F> = self
            .value(z)
            .data()
            .iter()
            .zip(targets.iter())
            .map(|(&zv, &t)| {
                let pos = if zv > F::zero() { zv } else { F::zero() };
                pos - zv * t + (F::one() + (-zv.abs()).exp()).ln()
            })
            .collect();
        let shape = self.value(z).shape().to_vec();
        let ng = self.needs(z);
        self.push(
            Tensor::new(shape, data).expect("same shape"),
            ng,
            Op::BceFromLogits { z, targets },
        )
    }

    fn grad_slice(&mut self, r: TensorRef) -> &mut Vec<F> {
        let numel = self.nodes[r.0].value.numel();
        self.nodes[r.0].grad.get_or_insert_with(|| vec![F::zero(); numel])
    }

    fn add_grad(&mut self, r: TensorRef, g: &[F]) {
        if !self.needs(r) {
            return;
        }
        let dst = self.grad_slice(r);
        debug_assert_eq!(dst.len(), g.len());
        for (d, &s) in dst.iter_mut().zip(g) {
            *d = *d + s;
        }
    }

    /// Reverse pass from a scalar loss. Populates gradients for every
    /// reachable `param` node. Errors if called without a recorded
    /// trace, on a non-scalar, or when any produced value is non-finite.
    pub fn backward(&mut self, loss: TensorRef) -> Result<()> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(TensorError::Usage(
                "backward called before any forward trace was recorded".into(),
            ));
        }
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(TensorError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        self.nodes[loss.0].value.ensure_finite("loss")?;
        for node in self.nodes.iter_mut() {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![F::one()]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad || self.nodes[i].grad.is_none() {
                continue;
            }
            let gy = self.nodes[i].grad.take().expect("checked");
            // detach the op so propagation can borrow self freely
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            self.propagate(i, &op, &gy);
            self.nodes[i].op = op;
            self.nodes[i].grad = Some(gy);
        }

        for node in self.nodes.iter() {
            if matches!(node.op, Op::Param) {
                if let Some(g) = &node.grad {
                    if !g.iter().all(|v| v.is_finite()) {
                        return Err(TensorError::NonFinite("parameter gradient"));
                    }
                }
            }
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, op: &Op<F>, gy: &[F]) {
        match op {
            Op::Leaf | Op::Param => {}
            Op::Matmul { a, b } => {
                let (a, b) = (*a, *b);
                let asha = self.value(a).shape().to_vec();
                let bsha = self.value(b).shape().to_vec();
                let (m, k, n) = (asha[0], asha[1], bsha[1]);
                if self.needs(a) {
                    let mut da = vec![F::zero(); m * k];
                    kernels::gemm_nt_accum(gy, self.value(b).data(), m, n, k, &mut da);
                    self.add_grad(a, &da);
                }
                if self.needs(b) {
                    let mut db = vec![F::zero(); k * n];
                    kernels::gemm_tn_accum(self.value(a).data(), gy, m, k, n, &mut db);
                    self.add_grad(b, &db);
                }
            }
            Op::BiasAddRows { x, b } => {
                let (x, b) = (*x, *b);
                let n = self.value(b).numel();
                if self.needs(x) {
                    self.add_grad(x, gy);
                }
                if self.needs(b) {
                    let mut db = vec![F::zero(); n];
                    for row in gy.chunks_exact(n) {
                        for (d, &g) in db.iter_mut().zip(row) {
                            *d = *d + g;
                        }
                    }
                    self.add_grad(b, &db);
                }
            }
            Op::Conv2dBatch {
                x,
                k,
                b,
                stride,
                cols,
            } => {
                let (x, k, b, stride) = (*x, *k, *b, *stride);
                let xs = self.value(x).shape().to_vec();
                let ks = self.value(k).shape().to_vec();
                let (bsz, c_in, h, w) = (xs[0], xs[1], xs[2], xs[3]);
                let (c_out, kh, kw) = (ks[0], ks[2], ks[3]);
                let oh = kernels::conv_out_extent(h, kh, stride);
                let ow = kernels::conv_out_extent(w, kw, stride);
                let p = oh * ow;
                let kdim = c_in * kh * kw;
                let need_x = self.needs(x);
                let need_k = self.needs(k);
                let need_b = self.needs(b);
                let mut dk = vec![F::zero(); c_out * kdim];
                let mut db = vec![F::zero(); c_out];
                let mut dx = if need_x {
                    vec![F::zero(); bsz * c_in * h * w]
                } else {
                    Vec::new()
                };
                {
                    let kdata = self.value(k).data();
                    for s in 0..bsz {
                        let dout = &gy[s * c_out * p..(s + 1) * c_out * p];
                        let col = &cols[s * kdim * p..(s + 1) * kdim * p];
                        if need_k {
                            kernels::gemm_nt_accum(dout, col, c_out, p, kdim, &mut dk);
                        }
                        if need_b {
                            for (co, row) in dout.chunks_exact(p).enumerate() {
                                db[co] = db[co] + kernels::sum(row);
                            }
                        }
                        if need_x {
                            let mut dcol = vec![F::zero(); kdim * p];
                            kernels::gemm_tn_accum(kdata, dout, c_out, kdim, p, &mut dcol);
                            kernels::col2im_accum(
                                &dcol,
                                c_in,
                                h,
                                w,
                                kh,
                                kw,
                                stride,
                                &mut dx[s * c_in * h * w..(s + 1) * c_in * h * w],
                            );
                        }
                    }
                }
                if need_k {
                    self.add_grad(k, &dk);
                }
                if need_b {
                    self.add_grad(b, &db);
                }
                if need_x {
                    self.add_grad(x, &dx);
                }
            }
            Op::Relu { x } => {
                let x = *x;
                let dx: Vec<F> = self
                    .value(x)
                    .data()
                    .iter()
                    .zip(gy)
                    .map(|(&xv, &g)| if xv > F::zero() { g } else { F::zero() })
                    .collect();
                self.add_grad(x, &dx);
            }
            Op::Sigmoid { x } => {
                let x = *x;
                let dx: Vec<F> = self.nodes[i]
                    .value
                    .data()
                    .iter()
                    .zip(gy)
                    .map(|(&y, &g)| g * y * (F::one() - y))
                    .collect();
                self.add_grad(x, &dx);
            }
            Op::Tanh { x } => {
                let x = *x;
                let dx: Vec<F> = self.nodes[i]
                    .value
                    .data()
                    .iter()
                    .zip(gy)
                    .map(|(&y, &g)| g * (F::one() - y * y))
                    .collect();
                self.add_grad(x, &dx);
            }
            Op::SoftmaxRows { x } => {
                let x = *x;
                let cols = *self.nodes[i].value.shape().last().expect("non-empty");
                let numel = self.nodes[i].value.numel();
                let mut dx = vec![F::zero(); numel];
                for r in 0..numel / cols {
                    let yr = &self.nodes[i].value.data()[r * cols..(r + 1) * cols];
                    let gr = &gy[r * cols..(r + 1) * cols];
                    let d = kernels::dot(yr, gr);
                    for j in 0..cols {
                        dx[r * cols + j] = yr[j] * (gr[j] - d);
                    }
                }
                self.add_grad(x, &dx);
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.add_grad(a, gy);
                self.add_grad(b, gy);
            }
            Op::Sub { a, b } => {
                let (a, b) = (*a, *b);
                self.add_grad(a, gy);
                if self.needs(b) {
                    let neg: Vec<F> = gy.iter().map(|&g| -g).collect();
                    self.add_grad(b, &neg);
                }
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                if self.needs(a) {
                    let da: Vec<F> = self
                        .value(b)
                        .data()
                        .iter()
                        .zip(gy)
                        .map(|(&bv, &g)| bv * g)
                        .collect();
                    self.add_grad(a, &da);
                }
                if self.needs(b) {
                    let db: Vec<F> = self
                        .value(a)
                        .data()
                        .iter()
                        .zip(gy)
                        .map(|(&av, &g)| av * g)
                        .collect();
                    self.add_grad(b, &db);
                }
            }
            Op::Scale { x, c } => {
                let (x, c) = (*x, *c);
                let dx: Vec<F> = gy.iter().map(|&g| g * c).collect();
                self.add_grad(x, &dx);
            }
            Op::MulMask { x, mask } => {
                let x = *x;
                let dx: Vec<F> = mask.iter().zip(gy).map(|(&m, &g)| m * g).collect();
                self.add_grad(x, &dx);
            }
            Op::SliceCols { x, from, to } => {
                let (x, from, to) = (*x, *from, *to);
                let cols = self.value(x).shape()[1];
                let rows = self.value(x).shape()[0];
                let width = to - from;
                let mut dx = vec![F::zero(); rows * cols];
                for r in 0..rows {
                    dx[r * cols + from..r * cols + to]
                        .copy_from_slice(&gy[r * width..(r + 1) * width]);
                }
                self.add_grad(x, &dx);
            }
            Op::GatherCols { x, idx } => {
                let x = *x;
                let cols = self.value(x).shape()[1];
                let rows = self.value(x).shape()[0];
                let mut dx = vec![F::zero(); rows * cols];
                for (r, &j) in idx.iter().enumerate() {
                    dx[r * cols + j] = gy[r];
                }
                self.add_grad(x, &dx);
            }
            Op::Square { x } => {
                let x = *x;
                let two = F::from_f64c(2.0);
                let dx: Vec<F> = self
                    .value(x)
                    .data()
                    .iter()
                    .zip(gy)
                    .map(|(&xv, &g)| two * xv * g)
                    .collect();
                self.add_grad(x, &dx);
            }
            Op::SumAll { x } => {
                let x = *x;
                let g = gy[0];
                let dx = vec![g; self.value(x).numel()];
                self.add_grad(x, &dx);
            }
            Op::Reshape { x } => {
                self.add_grad(*x, gy);
            }
            Op::BceFromLogits { z, targets } => {
                let z = *z;
                let dz: Vec<F> = self
                    .value(z)
                    .data()
                    .iter()
                    .zip(targets.iter())
                    .zip(gy)
                    .map(|((&zv, &t), &g)| (sigmoid_s(zv) - t) * g)
                    .collect();
                self.add_grad(z, &dz);
            }
        }
    }

    /// Gradient accumulated at a node (normally a `param`).
    pub fn grad_of(&self, r: TensorRef) -> Option<Tensor<F>> {
        let node = &self.nodes[r.0];
        node.grad.as_ref().map(|g| {
            Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad shape")
        })
    }

    /// Move the gradient for `r` into the parameter's grad slot.
    pub fn write_grad_into(&self, r: TensorRef, param: &mut Tensor<F>) {
        let node = &self.nodes[r.0];
        debug_assert_eq!(node.value.shape(), param.shape());
        match &node.grad {
            Some(g) => param.set_grad(g.clone()),
            None => param.set_grad(vec![F::zero(); param.numel()]),
        }
    }
}
