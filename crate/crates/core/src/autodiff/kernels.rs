//! Scalar and batched kernels shared by the tape ops and the tape-free
//! evaluation path, so both produce identical primal values.
//!
//! Batched field data is feature-major: channel `c` of an `[n, ch]` batch
//! occupies the contiguous block `[c*n, (c+1)*n)`. Every affine kernel is
//! then a sequence of contiguous element-wise updates with no
//! cross-iteration reduction, which the compiler vectorizes under strict
//! float semantics.

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `y = x W^T + b` with `x: [in, n]` feature-major, `w: [out, in]`
/// row-major, `b: [out]`, `y: [out, n]` feature-major.
pub fn linear_value(x: &[f64], n: usize, in_w: usize, w: &[f64], out_w: usize, b: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), n * in_w);
    debug_assert_eq!(w.len(), out_w * in_w);
    debug_assert_eq!(y.len(), n * out_w);
    for o in 0..out_w {
        let yr = &mut y[o * n..(o + 1) * n];
        yr.iter_mut().for_each(|v| *v = b[o]);
        for i in 0..in_w {
            let wv = w[o * in_w + i];
            let xr = &x[i * n..(i + 1) * n];
            for j in 0..n {
                yr[j] += wv * xr[j];
            }
        }
    }
}

/// Tangent of the affine map: `yt = xt W^T` (no bias term).
pub fn linear_tangent(xt: &[f64], n: usize, in_w: usize, w: &[f64], out_w: usize, yt: &mut [f64]) {
    for o in 0..out_w {
        let yr = &mut yt[o * n..(o + 1) * n];
        yr.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..in_w {
            let wv = w[o * in_w + i];
            let xr = &xt[i * n..(i + 1) * n];
            for j in 0..n {
                yr[j] += wv * xr[j];
            }
        }
    }
}

/// `xadj += yadj W`, the input adjoint of the affine map (feature-major).
pub fn linear_backprop_input(yadj: &[f64], n: usize, out_w: usize, w: &[f64], in_w: usize, xadj: &mut [f64]) {
    debug_assert_eq!(yadj.len(), n * out_w);
    debug_assert_eq!(xadj.len(), n * in_w);
    for o in 0..out_w {
        let yr = &yadj[o * n..(o + 1) * n];
        for i in 0..in_w {
            let wv = w[o * in_w + i];
            if wv != 0.0 {
                let xr = &mut xadj[i * n..(i + 1) * n];
                for j in 0..n {
                    xr[j] += wv * yr[j];
                }
            }
        }
    }
}

/// `wadj += yadj^T x`, the weight adjoint of the affine map.
///
/// Both operands are feature-major, so each entry is a contiguous dot
/// product. 2x2 output tiles over batch chunks keep the rows cache-resident;
/// the chunk order is fixed, so the reduction is deterministic.
pub fn linear_backprop_weight(yadj: &[f64], n: usize, out_w: usize, x: &[f64], in_w: usize, wadj: &mut [f64]) {
    debug_assert_eq!(yadj.len(), n * out_w);
    debug_assert_eq!(x.len(), n * in_w);
    const CHUNK: usize = 512;
    let mut o = 0;
    while o < out_w {
        let ob = (out_w - o).min(2);
        let mut i = 0;
        while i < in_w {
            let ib = (in_w - i).min(2);
            let mut acc = [[0.0f64; 2]; 2];
            let mut start = 0;
            while start < n {
                let end = (start + CHUNK).min(n);
                for (oo, row) in acc.iter_mut().enumerate().take(ob) {
                    let yr = &yadj[(o + oo) * n + start..(o + oo) * n + end];
                    for (ii, slot) in row.iter_mut().enumerate().take(ib) {
                        let xr = &x[(i + ii) * n + start..(i + ii) * n + end];
                        *slot += dot_lanes(yr, xr);
                    }
                }
                start = end;
            }
            for oo in 0..ob {
                for ii in 0..ib {
                    wadj[(o + oo) * in_w + (i + ii)] += acc[oo][ii];
                }
            }
            i += ib;
        }
        o += ob;
    }
}

/// Dot product with sixteen accumulator lanes (deterministic lane order);
/// enough independent chains to hide the floating add latency.
pub fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let mut acc = [0.0f64; 16];
    let mut j = 0;
    while j + 16 <= n {
        for l in 0..16 {
            acc[l] += a[j + l] * b[j + l];
        }
        j += 16;
    }
    let mut tail = 0.0;
    while j < n {
        tail += a[j] * b[j];
        j += 1;
    }
    let mut quads = [0.0f64; 4];
    for l in 0..16 {
        quads[l / 4] += acc[l];
    }
    ((quads[0] + quads[1]) + (quads[2] + quads[3])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_kernels_match_naive_loops() {
        let mut rng_state = 0x243f6a88u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let (n, in_w, out_w) = (23, 7, 5);
        // Feature-major operands.
        let x: Vec<f64> = (0..n * in_w).map(|_| next()).collect();
        let w: Vec<f64> = (0..out_w * in_w).map(|_| next()).collect();
        let b: Vec<f64> = (0..out_w).map(|_| next()).collect();
        let yadj: Vec<f64> = (0..n * out_w).map(|_| next()).collect();

        let mut y = vec![0.0; n * out_w];
        linear_value(&x, n, in_w, &w, out_w, &b, &mut y);
        for j in 0..n {
            for o in 0..out_w {
                let mut acc = b[o];
                for i in 0..in_w {
                    acc += x[i * n + j] * w[o * in_w + i];
                }
                assert!((y[o * n + j] - acc).abs() < 1e-12);
            }
        }

        let mut xadj = vec![0.0; n * in_w];
        linear_backprop_input(&yadj, n, out_w, &w, in_w, &mut xadj);
        for j in 0..n {
            for i in 0..in_w {
                let mut acc = 0.0;
                for o in 0..out_w {
                    acc += yadj[o * n + j] * w[o * in_w + i];
                }
                assert!((xadj[i * n + j] - acc).abs() < 1e-12);
            }
        }

        let mut wadj = vec![0.0; out_w * in_w];
        linear_backprop_weight(&yadj, n, out_w, &x, in_w, &mut wadj);
        for o in 0..out_w {
            for i in 0..in_w {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += yadj[o * n + j] * x[i * n + j];
                }
                assert!((wadj[o * in_w + i] - acc).abs() < 1e-10, "({o},{i})");
            }
        }
    }
}
