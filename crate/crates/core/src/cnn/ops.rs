//! Dense kernels shared by the layers. Tensors are row-major NHWC.

/// `C = beta·C + op(A)·op(B)` where `op(A)` is `m×k` and `op(B)` is `k×n`.
///
/// With `ta` set, `a` holds the `k×m` matrix and is read transposed; likewise
/// `tb` for `b` (`n×k`).
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unrolls the valid `k×k` patches of one `h×w×c` image into a
/// `(oh·ow) × (k·k·c)` matrix, patch entries ordered `(di, dj, ch)`.
pub fn im2col(x: &[f64], h: usize, w: usize, c: usize, k: usize, out: &mut [f64]) {
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let row = k * k * c;
    debug_assert_eq!(x.len(), h * w * c);
    debug_assert_eq!(out.len(), oh * ow * row);
    for i in 0..oh {
        for j in 0..ow {
            let dst = &mut out[(i * ow + j) * row..][..row];
            for di in 0..k {
                let src = ((i + di) * w + j) * c;
                dst[di * k * c..(di + 1) * k * c].copy_from_slice(&x[src..src + k * c]);
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch gradients back onto the image.
pub fn col2im_add(col: &[f64], h: usize, w: usize, c: usize, k: usize, dx: &mut [f64]) {
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let row = k * k * c;
    for i in 0..oh {
        for j in 0..ow {
            let src = &col[(i * ow + j) * row..][..row];
            for di in 0..k {
                let dst = ((i + di) * w + j) * c;
                for (d, s) in dx[dst..dst + k * c]
                    .iter_mut()
                    .zip(&src[di * k * c..(di + 1) * k * c])
                {
                    *d += s;
                }
            }
        }
    }
}

/// Valid, stride-1 cross-correlation of one image with `f` filters.
/// `weights` is `(k·k·c) × f`, matching the [`im2col`] patch order.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_valid(
    x: &[f64],
    h: usize,
    w: usize,
    c: usize,
    k: usize,
    f: usize,
    weights: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut col = vec![0.0; oh * ow * k * k * c];
    im2col(x, h, w, c, k, &mut col);
    let mut out = vec![0.0; oh * ow * f];
    for r in out.chunks_exact_mut(f) {
        r.copy_from_slice(bias);
    }
    gemm(
        oh * ow,
        k * k * c,
        f,
        &col,
        false,
        weights,
        false,
        1.0,
        &mut out,
    );
    out
}

/// Non-overlapping `s×s` max pooling (floor on ragged edges). Returns the
/// pooled values and, for each, the flat input index that won.
pub fn maxpool(
    x: &[f64],
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    s: usize,
) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / s, w / s);
    let mut out = Vec::with_capacity(n * oh * ow * c);
    let mut arg = Vec::with_capacity(n * oh * ow * c);
    for b in 0..n {
        let base = b * h * w * c;
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let mut best = base + (i * s * w + j * s) * c + ch;
                    for di in 0..s {
                        for dj in 0..s {
                            let idx = base + ((i * s + di) * w + j * s + dj) * c + ch;
                            if x[idx] > x[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x[best]);
                    arg.push(best);
                }
            }
        }
    }
    (out, arg)
}

pub fn softmax_rows(z: &mut [f64], width: usize) {
    for row in z.chunks_exact_mut(width) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for l in 0..k {
                    c[i * n + j] += a[i * k + l] * b[l * n + j];
                }
            }
        }
        c
    }

    fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
        let mut t = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = a[i * c + j];
            }
        }
        t
    }

    #[test]
    fn gemm_variants() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.91).cos()).collect();
        let want = naive(m, k, n, &a, &b);
        let at = transpose(&a, m, k);
        let bt = transpose(&b, k, n);
        for (aa, ta) in [(&a, false), (&at, true)] {
            for (bb, tb) in [(&b, false), (&bt, true)] {
                let mut c = vec![1.0; m * n];
                gemm(m, k, n, aa, ta, bb, tb, 1.0, &mut c);
                for (x, y) in c.iter().zip(&want) {
                    assert!((x - 1.0 - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_kernel_crops() {
        let x: Vec<f64> = (0..25).map(|v| v as f64).collect();
        let mut kern = vec![0.0; 9];
        kern[4] = 1.0;
        let y = conv2d_valid(&x, 5, 5, 1, 3, 1, &kern, &[0.0]);
        assert_eq!(y, vec![6.0, 7.0, 8.0, 11.0, 12.0, 13.0, 16.0, 17.0, 18.0]);
    }

    #[test]
    fn cross_correlation_by_hand() {
        // not flipped: out[0][0] = Σ x[di][dj] · k[di][dj]
        let x: Vec<f64> = (0..25).map(|v| ((v * 7) % 11) as f64 - 3.0).collect();
        let kern = [1.0, 0.0, -1.0, 2.0, 0.5, 0.0, 0.0, -2.0, 1.0];
        let y = conv2d_valid(&x, 5, 5, 1, 3, 1, &kern, &[0.25]);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.25;
                for di in 0..3 {
                    for dj in 0..3 {
                        s += x[(i + di) * 5 + j + dj] * kern[di * 3 + dj];
                    }
                }
                assert!((y[i * 3 + j] - s).abs() < 1e-12);
            }
        }
        // top-left written out in full
        let tl = x[0] - x[2] + 2.0 * x[5] + 0.5 * x[6] - 2.0 * x[11] + x[12] + 0.25;
        assert!((y[0] - tl).abs() < 1e-12);
    }

    #[test]
    fn col2im_is_adjoint() {
        let (h, w, c, k) = (6, 5, 2, 3);
        let x: Vec<f64> = (0..h * w * c).map(|i| (i as f64).sin()).collect();
        let rows = (h - 2) * (w - 2) * k * k * c;
        let y: Vec<f64> = (0..rows).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut col = vec![0.0; rows];
        im2col(&x, h, w, c, k, &mut col);
        let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut dx = vec![0.0; x.len()];
        col2im_add(&y, h, w, c, k, &mut dx);
        let rhs: f64 = dx.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn pooling_floors() {
        let x: Vec<f64> = (0..25).map(|v| v as f64).collect();
        let (y, arg) = maxpool(&x, 1, 5, 5, 1, 2);
        assert_eq!(y, vec![6.0, 8.0, 16.0, 18.0]);
        assert_eq!(arg, vec![6, 8, 16, 18]);
    }

    #[test]
    fn softmax_is_distribution() {
        let mut z = vec![1000.0, -1000.0, 0.0, 0.0, 3.0, 3.5];
        softmax_rows(&mut z, 2);
        assert_eq!(z[0], 1.0);
        assert_eq!(&z[2..4], &[0.5, 0.5]);
        assert!((z[4] + z[5] - 1.0).abs() < 1e-15);
    }
}
