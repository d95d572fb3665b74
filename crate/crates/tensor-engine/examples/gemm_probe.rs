//! Rough throughput probe for the gemm kernels at the shapes the
//! training update actually uses. Run with --release.

use std::time::Instant;
use tensor_engine::kernels::{gemm_accum, gemm_nt_accum, gemm_tn_accum};

fn bench(label: &str, flops_per_call: f64, mut f: impl FnMut()) {
    // warm up
    for _ in 0..3 {
        f();
    }
    let reps = 50;
    let t0 = Instant::now();
    for _ in 0..reps {
        f();
    }
    let dt = t0.elapsed().as_secs_f64();
    let gflops = flops_per_call * reps as f64 / dt / 1e9;
    println!("{label:<28} {gflops:7.2} GFLOP/s");
}

fn main() {
    // lstm/fc4-sized: [32,768] @ [768,512]
    let (m, k, n) = (32, 768, 512);
    let a = vec![0.5f32; m * k];
    let b = vec![0.25f32; k * n];
    let mut c = vec![0.0f32; m * n];
    bench("gemm 32x768x512 (fwd)", 2.0 * (m * k * n) as f64, || {
        c.iter_mut().for_each(|v| *v = 0.0);
        gemm_accum(&a, &b, m, k, n, &mut c);
    });

    let dy = vec![0.1f32; m * n];
    let mut dw = vec![0.0f32; k * n];
    bench("gemm_tn (dW)", 2.0 * (m * k * n) as f64, || {
        dw.iter_mut().for_each(|v| *v = 0.0);
        gemm_tn_accum(&a, &dy, m, k, n, &mut dw);
    });

    let mut dx = vec![0.0f32; m * k];
    bench("gemm_nt (dX)", 2.0 * (m * k * n) as f64, || {
        dx.iter_mut().for_each(|v| *v = 0.0);
        gemm_nt_accum(&dy, &b, m, n, k, &mut dx);
    });

    // conv1-sized: [16,192] @ [192,140]
    let (m2, k2, n2) = (16, 192, 140);
    let a2 = vec![0.5f32; m2 * k2];
    let b2 = vec![0.25f32; k2 * n2];
    let mut c2 = vec![0.0f32; m2 * n2];
    bench("gemm 16x192x140 (conv1)", 2.0 * (m2 * k2 * n2) as f64, || {
        c2.iter_mut().for_each(|v| *v = 0.0);
        gemm_accum(&a2, &b2, m2, k2, n2, &mut c2);
    });
}
