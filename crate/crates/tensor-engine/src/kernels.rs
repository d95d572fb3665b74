//! Low-level numeric loops shared by the value ops and the tape.
//!
//! Every kernel accumulates in a fixed order, so results are bitwise
//! reproducible run to run. Inner loops are written so LLVM can lift
//! them to packed FMA: `axpy` has independent lanes, `dot` keeps eight
//! explicit accumulators reduced in a fixed order.

use crate::real::Real;

const LANES: usize = 8;

/// c += s * b, elementwise.
#[inline]
pub fn axpy<F: Real>(s: F, b: &[F], c: &mut [F]) {
    debug_assert_eq!(b.len(), c.len());
    for (ci, &bi) in c.iter_mut().zip(b.iter()) {
        *ci = s.mul_add(bi, *ci);
    }
}

/// Dot product with a fixed eight-lane accumulation pattern.
#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let pa = &a[i * LANES..(i + 1) * LANES];
        let pb = &b[i * LANES..(i + 1) * LANES];
        for l in 0..LANES {
            acc[l] = pa[l].mul_add(pb[l], acc[l]);
        }
    }
    let mut s = F::zero();
    for l in 0..LANES {
        s = s + acc[l];
    }
    for i in chunks * LANES..a.len() {
        s = a[i].mul_add(b[i], s);
    }
    s
}

/// Sum with the same fixed lane pattern as `dot`.
#[inline]
pub fn sum<F: Real>(a: &[F]) -> F {
    let mut acc = [F::zero(); LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let pa = &a[i * LANES..(i + 1) * LANES];
        for l in 0..LANES {
            acc[l] = acc[l] + pa[l];
        }
    }
    let mut s = F::zero();
    for l in 0..LANES {
        s = s + acc[l];
    }
    for i in chunks * LANES..a.len() {
        s = s + a[i];
    }
    s
}

/// c += s0*b0 + s1*b1 + s2*b2 + s3*b3; amortizes the c traversal.
#[inline]
fn axpy4<F: Real>(s: [F; 4], b0: &[F], b1: &[F], b2: &[F], b3: &[F], c: &mut [F]) {
    for j in 0..c.len() {
        let mut v = s[0].mul_add(b0[j], c[j]);
        v = s[1].mul_add(b1[j], v);
        v = s[2].mul_add(b2[j], v);
        v = s[3].mul_add(b3[j], v);
        c[j] = v;
    }
}

/// C[m,n] += A[m,k] @ B[k,n], all row-major. The k loop is unrolled by
/// four; fully-zero groups (dropout) are skipped.
pub fn gemm_accum<F: Real>(a: &[F], b: &[F], m: usize, k: usize, n: usize, c: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let k4 = k / 4 * 4;
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        let mut kk = 0;
        while kk < k4 {
            let s = [arow[kk], arow[kk + 1], arow[kk + 2], arow[kk + 3]];
            let nonzero = s.iter().filter(|&&v| v != F::zero()).count();
            if nonzero == 4 {
                axpy4(
                    s,
                    &b[kk * n..kk * n + n],
                    &b[(kk + 1) * n..(kk + 1) * n + n],
                    &b[(kk + 2) * n..(kk + 2) * n + n],
                    &b[(kk + 3) * n..(kk + 3) * n + n],
                    crow,
                );
            } else if nonzero > 0 {
                // sparse group (dropout): touch only live rows
                for (off, &sv) in s.iter().enumerate() {
                    if sv != F::zero() {
                        axpy(sv, &b[(kk + off) * n..(kk + off + 1) * n], crow);
                    }
                }
            }
            kk += 4;
        }
        while kk < k {
            let av = arow[kk];
            if av != F::zero() {
                axpy(av, &b[kk * n..(kk + 1) * n], crow);
            }
            kk += 1;
        }
    }
}

/// C[m,j] += A[m,n] @ B[j,n]^T (B stored row-major as [j,n]).
pub fn gemm_nt_accum<F: Real>(a: &[F], b: &[F], m: usize, n: usize, j: usize, c: &mut [F]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), j * n);
    debug_assert_eq!(c.len(), m * j);
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        let crow = &mut c[i * j..(i + 1) * j];
        for (jj, cv) in crow.iter_mut().enumerate() {
            *cv = *cv + dot(arow, &b[jj * n..(jj + 1) * n]);
        }
    }
}

/// C[k,n] += A[m,k]^T @ D[m,n]. The m loop is unrolled by four so each
/// C row is traversed once per group.
pub fn gemm_tn_accum<F: Real>(a: &[F], d: &[F], m: usize, k: usize, n: usize, c: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(d.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    let m4 = m / 4 * 4;
    let mut mm = 0;
    while mm < m4 {
        let (a0, a1, a2, a3) = (
            &a[mm * k..(mm + 1) * k],
            &a[(mm + 1) * k..(mm + 2) * k],
            &a[(mm + 2) * k..(mm + 3) * k],
            &a[(mm + 3) * k..(mm + 4) * k],
        );
        let (d0, d1, d2, d3) = (
            &d[mm * n..(mm + 1) * n],
            &d[(mm + 1) * n..(mm + 2) * n],
            &d[(mm + 2) * n..(mm + 3) * n],
            &d[(mm + 3) * n..(mm + 4) * n],
        );
        for kk in 0..k {
            let s = [a0[kk], a1[kk], a2[kk], a3[kk]];
            if s.iter().any(|&v| v != F::zero()) {
                axpy4(s, d0, d1, d2, d3, &mut c[kk * n..(kk + 1) * n]);
            }
        }
        mm += 4;
    }
    while mm < m {
        let arow = &a[mm * k..(mm + 1) * k];
        let drow = &d[mm * n..(mm + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av != F::zero() {
                axpy(av, drow, &mut c[kk * n..(kk + 1) * n]);
            }
        }
        mm += 1;
    }
}

/// Output spatial extent of a valid (unpadded) convolution.
#[inline]
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize) -> usize {
    (input - kernel) / stride + 1
}

/// Unfold x[C,H,W] into col[K,P] with K = C*kh*kw and P = OH*OW, so the
/// convolution becomes kernels[Cout,K] @ col[K,P].
pub fn im2col<F: Real>(
    x: &[F],
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    col: &mut [F],
) {
    let oh = conv_out_extent(h, kh, stride);
    let ow = conv_out_extent(w, kw, stride);
    let p = oh * ow;
    debug_assert_eq!(x.len(), c_in * h * w);
    debug_assert_eq!(col.len(), c_in * kh * kw * p);
    let mut krow = 0;
    for ci in 0..c_in {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for dy in 0..kh {
            for dx in 0..kw {
                let dst = &mut col[krow * p..(krow + 1) * p];
                let mut pi = 0;
                for oy in 0..oh {
                    let src = &plane[(oy * stride + dy) * w..];
                    for ox in 0..ow {
                        dst[pi] = src[ox * stride + dx];
                        pi += 1;
                    }
                }
                krow += 1;
            }
        }
    }
}

/// Scatter-add the column gradient back onto dx[C,H,W].
pub fn col2im_accum<F: Real>(
    dcol: &[F],
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    dx: &mut [F],
) {
    let oh = conv_out_extent(h, kh, stride);
    let ow = conv_out_extent(w, kw, stride);
    let p = oh * ow;
    debug_assert_eq!(dx.len(), c_in * h * w);
    debug_assert_eq!(dcol.len(), c_in * kh * kw * p);
    let mut krow = 0;
    for ci in 0..c_in {
        let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
        for dy in 0..kh {
            for dx_off in 0..kw {
                let src = &dcol[krow * p..(krow + 1) * p];
                let mut pi = 0;
                for oy in 0..oh {
                    let row = &mut plane[(oy * stride + dy) * w..];
                    for ox in 0..ow {
                        let idx = ox * stride + dx_off;
                        row[idx] = row[idx] + src[pi];
                        pi += 1;
                    }
                }
                krow += 1;
            }
        }
    }
}
