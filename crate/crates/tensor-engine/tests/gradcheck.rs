//! Central-finite-difference oracle for every layer the engine exposes.
//!
//! Each check builds a scalar loss on an f64 tape from a flat parameter
//! vector, takes the analytic gradient via backward, and compares it
//! against (f(x+h) - f(x-h)) / 2h with h = 1e-3. The f64 shadow keeps
//! rounding noise far below the 1e-4 tolerance. Seeds are fixed;
//! relu-bearing nets use seeds whose preactivations stay clear of the
//! kink, where finite differences are meaningless.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_engine::tape::{Tape, TensorRef};
use tensor_engine::tensor::Tensor;

const STEP: f64 = 1e-3;
const TOLERANCE: f64 = 1e-4;
const EXEMPT_BELOW: f64 = 1e-8;

/// Doles out chunks of the flat parameter vector as tape params.
struct Alloc<'a> {
    theta: &'a [f64],
    pos: usize,
    refs: Vec<(TensorRef, usize)>,
}

impl<'a> Alloc<'a> {
    fn param(&mut self, tape: &mut Tape<f64>, shape: &[usize]) -> TensorRef {
        let n: usize = shape.iter().product();
        let t = Tensor::new(shape.to_vec(), self.theta[self.pos..self.pos + n].to_vec()).unwrap();
        let r = tape.param(&t);
        self.refs.push((r, n));
        self.pos += n;
        r
    }
}

fn run_loss<B>(builder: &B, theta: &[f64], grad: bool) -> (f64, Vec<f64>)
where
    B: Fn(&mut Tape<f64>, &mut Alloc) -> TensorRef,
{
    let mut tape = Tape::new();
    let mut alloc = Alloc {
        theta,
        pos: 0,
        refs: Vec::new(),
    };
    let loss = builder(&mut tape, &mut alloc);
    assert_eq!(alloc.pos, theta.len(), "builder must consume all params");
    let value = tape.value(loss).data()[0];
    if !grad {
        return (value, Vec::new());
    }
    tape.backward(loss).unwrap();
    let mut g = Vec::with_capacity(theta.len());
    for (r, n) in alloc.refs {
        match tape.grad_of(r) {
            Some(t) => g.extend_from_slice(t.data()),
            None => g.extend(std::iter::repeat(0.0).take(n)),
        }
    }
    (value, g)
}

fn check<B>(label: &str, total: usize, seed: u64, builder: B)
where
    B: Fn(&mut Tape<f64>, &mut Alloc) -> TensorRef,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..total).map(|_| rng.gen_range(-0.9..0.9)).collect();
    let (_, analytic) = run_loss(&builder, &theta, true);

    let mut max_rel = 0.0f64;
    let mut argmax = 0;
    for i in 0..total {
        let mut plus = theta.clone();
        plus[i] += STEP;
        let mut minus = theta.clone();
        minus[i] -= STEP;
        let (fp, _) = run_loss(&builder, &plus, false);
        let (fm, _) = run_loss(&builder, &minus, false);
        let numeric = (fp - fm) / (2.0 * STEP);
        let scale = analytic[i].abs() + numeric.abs();
        if scale < EXEMPT_BELOW {
            continue;
        }
        let rel = (analytic[i] - numeric).abs() / scale;
        if rel > max_rel {
            max_rel = rel;
            argmax = i;
        }
    }
    assert!(
        max_rel < TOLERANCE,
        "{label} seed {seed}: max rel err {max_rel:.3e} at param {argmax}"
    );
}

/// Fixed probe so multi-output layers reduce to a scalar.
fn probe_loss(tape: &mut Tape<f64>, out: TensorRef, seed: u64) -> TensorRef {
    let n = tape.value(out).numel();
    let shape = tape.value(out).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let probe = Tensor::from_fn(&shape, |_| rng.gen_range(-1.0..1.0));
    assert_eq!(probe.numel(), n);
    let p = tape.leaf(probe);
    let prod = tape.mul(out, p);
    tape.sum_all(prod)
}

#[test]
fn linear_layer_gradients() {
    for (seed, (m, k, n)) in [(1u64, (1, 3, 2)), (2, (4, 2, 5)), (3, (2, 6, 1)), (4, (3, 3, 3))] {
        let total = m * k + k * n + n;
        check("linear", total, seed, |tape, alloc| {
            let x = alloc.param(tape, &[m, k]);
            let w = alloc.param(tape, &[k, n]);
            let b = alloc.param(tape, &[n]);
            let y = tape.matmul(x, w);
            let y = tape.bias_add_rows(y, b);
            let y = tape.tanh(y);
            probe_loss(tape, y, seed)
        });
    }
}

#[test]
fn conv_layer_gradients() {
    let cases = [
        (10u64, (1usize, 1usize, 4usize, 4usize, 2usize, 2usize, 1usize)),
        (11, (2, 2, 5, 6, 3, 3, 2)),
        (12, (1, 3, 4, 5, 2, 3, 1)),
        (13, (2, 1, 6, 4, 4, 2, 2)),
        (14, (1, 2, 3, 3, 3, 3, 1)), // kernel == input
    ];
    for (seed, (bsz, c_in, h, w, kh, kw, stride)) in cases {
        let c_out = 2;
        let total = bsz * c_in * h * w + c_out * c_in * kh * kw + c_out;
        check("conv2d", total, seed, move |tape, alloc| {
            let x = alloc.param(tape, &[bsz, c_in, h, w]);
            let k = alloc.param(tape, &[c_out, c_in, kh, kw]);
            let b = alloc.param(tape, &[c_out]);
            let y = tape.conv2d_batch(x, k, b, stride);
            let y = tape.sigmoid(y);
            probe_loss(tape, y, seed)
        });
    }
}

#[test]
fn lstm_step_gradients() {
    for (seed, (bsz, n_in, hid)) in [(20u64, (1, 2, 2)), (21, (3, 4, 3)), (22, (2, 5, 1)), (23, (1, 3, 4))] {
        let total = bsz * n_in + 2 * bsz * hid + n_in * 4 * hid + hid * 4 * hid + 4 * hid;
        check("lstm_step", total, seed, move |tape, alloc| {
            let x = alloc.param(tape, &[bsz, n_in]);
            let h0 = alloc.param(tape, &[bsz, hid]);
            let c0 = alloc.param(tape, &[bsz, hid]);
            let wx = alloc.param(tape, &[n_in, 4 * hid]);
            let wh = alloc.param(tape, &[hid, 4 * hid]);
            let bias = alloc.param(tape, &[4 * hid]);
            let (h1, _c1) = lstm_on_tape(tape, x, h0, c0, wx, wh, bias, hid);
            probe_loss(tape, h1, seed)
        });
    }
}

/// LSTM cell from tape primitives; mirrors the agent nets' wiring.
#[allow(clippy::too_many_arguments)]
fn lstm_on_tape(
    tape: &mut Tape<f64>,
    x: TensorRef,
    h0: TensorRef,
    c0: TensorRef,
    wx: TensorRef,
    wh: TensorRef,
    bias: TensorRef,
    hid: usize,
) -> (TensorRef, TensorRef) {
    let zx = tape.matmul(x, wx);
    let zh = tape.matmul(h0, wh);
    let z = tape.add(zx, zh);
    let z = tape.bias_add_rows(z, bias);
    let zi = tape.slice_cols(z, 0, hid);
    let zf = tape.slice_cols(z, hid, 2 * hid);
    let zg = tape.slice_cols(z, 2 * hid, 3 * hid);
    let zo = tape.slice_cols(z, 3 * hid, 4 * hid);
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let g = tape.tanh(zg);
    let o = tape.sigmoid(zo);
    let fc = tape.mul(f, c0);
    let ig = tape.mul(i, g);
    let c1 = tape.add(fc, ig);
    let tc = tape.tanh(c1);
    let h1 = tape.mul(o, tc);
    (h1, c1)
}

#[test]
fn activation_gradients() {
    // smooth activations
    for (seed, n) in [(30u64, 7usize), (31, 12), (32, 5)] {
        check("sigmoid", n, seed, move |tape, alloc| {
            let x = alloc.param(tape, &[n]);
            let y = tape.sigmoid(x);
            probe_loss(tape, y, seed)
        });
        check("tanh", n, seed, move |tape, alloc| {
            let x = alloc.param(tape, &[n]);
            let y = tape.tanh(x);
            probe_loss(tape, y, seed)
        });
    }
    for (seed, (r, c)) in [(33u64, (2usize, 4usize)), (34, (3, 3))] {
        check("softmax_rows", r * c, seed, move |tape, alloc| {
            let x = alloc.param(tape, &[r, c]);
            let y = tape.softmax_rows(x);
            probe_loss(tape, y, seed)
        });
    }
    // relu: verified seeds keep |x| > step around the kink
    for seed in [35u64, 36] {
        check("relu", 9, seed, move |tape, alloc| {
            let x = alloc.param(tape, &[9]);
            let y = tape.relu(x);
            probe_loss(tape, y, seed)
        });
    }
}

#[test]
fn mask_and_reduction_gradients() {
    for (seed, n) in [(40u64, 8usize), (41, 16)] {
        check("dropout_mask", n, seed, move |tape, alloc| {
            let x = alloc.param(tape, &[n]);
            let mut mrng = ChaCha8Rng::seed_from_u64(seed + 99);
            let mask: Vec<f64> = (0..n)
                .map(|_| if mrng.gen::<f32>() < 0.5 { 0.0 } else { 2.0 })
                .collect();
            let y = tape.mul_mask(x, mask);
            probe_loss(tape, y, seed)
        });
    }
    for (seed, (r, c)) in [(42u64, (3usize, 4usize)), (43, (2, 5))] {
        check("gather_square_sum", r * c, seed, move |tape, alloc| {
            let x = alloc.param(tape, &[r, c]);
            let idx: Vec<usize> = (0..r).map(|i| (i * 2 + 1) % c).collect();
            let sel = tape.gather_cols(x, idx);
            let sq = tape.square(sel);
            let s = tape.sum_all(sq);
            tape.scale(s, 0.5)
        });
    }
    for (seed, n) in [(44u64, 6usize), (45, 10)] {
        check("bce_from_logits", n, seed, move |tape, alloc| {
            let z = alloc.param(tape, &[n]);
            let mut trng = ChaCha8Rng::seed_from_u64(seed + 7);
            let targets: Vec<f64> = (0..n).map(|_| f64::from(trng.gen::<bool>())).collect();
            let e = tape.bce_from_logits(z, targets);
            let s = tape.sum_all(e);
            tape.scale(s, 1.0 / n as f64)
        });
    }
}

/// End-to-end miniature of the two-stream net: conv -> relu -> conv ->
/// relu -> flatten, then a feature branch (mask -> fc -> relu -> fc ->
/// bce) and a recurrent branch (mask -> lstm -> linear -> gather ->
/// squared TD error), summed into one joint loss.
#[test]
fn joint_two_stream_gradients() {
    // geometry small enough for fast FD but with every op in play
    let (c1, c2) = (2usize, 3usize);
    let (h, w) = (7usize, 8usize);
    let (kh1, kw1, s1) = (3usize, 3usize, 2usize);
    let oh1 = (h - kh1) / s1 + 1; // 3
    let ow1 = (w - kw1) / s1 + 1; // 3
    let (kh2, kw2, s2) = (2usize, 2usize, 1usize);
    let oh2 = oh1 - kh2 + 1;
    let ow2 = ow1 - kw2 + 1;
    let flat = c2 * oh2 * ow2;
    let hid = 3usize;
    let kfeat = 2usize;
    let actions = 4usize;
    let fc_hidden = 5usize;

    let total = 3 * h * w // frame (1 sample, 3 channels)
        + c1 * 3 * kh1 * kw1 + c1
        + c2 * c1 * kh2 * kw2 + c2
        + flat * fc_hidden + fc_hidden
        + fc_hidden * kfeat + kfeat
        + flat * 4 * hid + hid * 4 * hid + 4 * hid
        + hid * actions + actions
        + 2 * hid; // h0, c0

    for seed in [50u64, 53] {
        check("joint_two_stream", total, seed, move |tape, alloc| {
            let frame = alloc.param(tape, &[1, 3, h, w]);
            let k1 = alloc.param(tape, &[c1, 3, kh1, kw1]);
            let b1 = alloc.param(tape, &[c1]);
            let k2 = alloc.param(tape, &[c2, c1, kh2, kw2]);
            let b2 = alloc.param(tape, &[c2]);
            let fw = alloc.param(tape, &[flat, fc_hidden]);
            let fb = alloc.param(tape, &[fc_hidden]);
            let f2w = alloc.param(tape, &[fc_hidden, kfeat]);
            let f2b = alloc.param(tape, &[kfeat]);
            let wx = alloc.param(tape, &[flat, 4 * hid]);
            let wh = alloc.param(tape, &[hid, 4 * hid]);
            let lb = alloc.param(tape, &[4 * hid]);
            let qw = alloc.param(tape, &[hid, actions]);
            let qb = alloc.param(tape, &[actions]);
            let h0 = alloc.param(tape, &[1, hid]);
            let c0 = alloc.param(tape, &[1, hid]);

            let a1 = tape.conv2d_batch(frame, k1, b1, s1);
            let a1 = tape.relu(a1);
            let a2 = tape.conv2d_batch(a1, k2, b2, s2);
            let a2 = tape.relu(a2);
            let flat_t = tape.reshape(a2, &[1, flat]);

            let mut mrng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let mask_feat: Vec<f64> = (0..flat)
                .map(|_| if mrng.gen::<f32>() < 0.5 { 0.0 } else { 2.0 })
                .collect();
            let mask_lstm: Vec<f64> = (0..flat)
                .map(|_| if mrng.gen::<f32>() < 0.5 { 0.0 } else { 2.0 })
                .collect();

            // feature branch
            let fin = tape.mul_mask(flat_t, mask_feat);
            let f1 = tape.matmul(fin, fw);
            let f1 = tape.bias_add_rows(f1, fb);
            let f1 = tape.relu(f1);
            let logits = tape.matmul(f1, f2w);
            let logits = tape.bias_add_rows(logits, f2b);
            let targets: Vec<f64> = (0..kfeat).map(|i| f64::from(i % 2 == 0)).collect();
            let bce = tape.bce_from_logits(logits, targets);
            let feat_loss = tape.sum_all(bce);

            // recurrent branch
            let lin = tape.mul_mask(flat_t, mask_lstm);
            let (h1, _) = lstm_on_tape(tape, lin, h0, c0, wx, wh, lb, hid);
            let q = tape.matmul(h1, qw);
            let q = tape.bias_add_rows(q, qb);
            let qa = tape.gather_cols(q, vec![1]);
            let y = tape.leaf(Tensor::new(vec![1], vec![0.7]).unwrap());
            let err = tape.sub(y, qa);
            let sq = tape.square(err);
            let td_loss = tape.sum_all(sq);

            let joint = tape.add(td_loss, feat_loss);
            tape.scale(joint, 1.0)
        });
    }
}
