use crate::scalar::Scalar;

/// Map a possibly out-of-range index onto `0..n` by mirror reflection
/// without repeating the edge sample (`-1 -> 1`, `n -> n-2`).
/// Folds repeatedly, so any padding width is accepted.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// 1×1 convolution: `y = W·x + b`, `W` is `[cout, cin]`, `x` is `[cin, pixels]`.
pub fn pointwise_forward<T: Scalar>(
    weight: &[T],
    bias: &[T],
    cin: usize,
    cout: usize,
    x: &[T],
    pixels: usize,
) -> Vec<T> {
    debug_assert_eq!(weight.len(), cin * cout);
    debug_assert_eq!(bias.len(), cout);
    debug_assert_eq!(x.len(), cin * pixels);
    let mut y = vec![T::zero(); cout * pixels];
    for (row, &b) in y.chunks_exact_mut(pixels).zip(bias) {
        row.iter_mut().for_each(|v| *v = b);
    }
    T::gemm(cout, cin, pixels, weight, false, x, false, &mut y, true);
    y
}

#[allow(clippy::too_many_arguments)]
pub fn pointwise_backward<T: Scalar>(
    weight: &[T],
    cin: usize,
    cout: usize,
    x: &[T],
    pixels: usize,
    dy: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    debug_assert_eq!(dy.len(), cout * pixels);
    T::gemm(cout, pixels, cin, dy, false, x, true, dweight, true);
    for (db, row) in dbias.iter_mut().zip(dy.chunks_exact(pixels)) {
        *db += row.iter().copied().sum::<T>();
    }
    let mut dx = vec![T::zero(); cin * pixels];
    T::gemm(cin, cout, pixels, weight, true, dy, false, &mut dx, false);
    dx
}

fn pad_reflect<T: Scalar>(x: &[T], channels: usize, h: usize, w: usize, pad: usize) -> Vec<T> {
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let col_src: Vec<usize> = (0..pw)
        .map(|j| reflect_index(j as isize - pad as isize, w))
        .collect();
    let mut out = vec![T::zero(); channels * ph * pw];
    for c in 0..channels {
        let plane = &x[c * h * w..(c + 1) * h * w];
        let dst = &mut out[c * ph * pw..(c + 1) * ph * pw];
        for i in 0..ph {
            let src_row = reflect_index(i as isize - pad as isize, h);
            let src = &plane[src_row * w..(src_row + 1) * w];
            let row = &mut dst[i * pw..(i + 1) * pw];
            row[pad..pad + w].copy_from_slice(src);
            for j in (0..pad).chain(pad + w..pw) {
                row[j] = src[col_src[j]];
            }
        }
    }
    out
}

/// Adjoint of [`pad_reflect`]: folds padded gradients back onto their sources.
fn pad_reflect_adjoint<T: Scalar>(
    dxp: &[T],
    channels: usize,
    h: usize,
    w: usize,
    pad: usize,
) -> Vec<T> {
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let col_src: Vec<usize> = (0..pw)
        .map(|j| reflect_index(j as isize - pad as isize, w))
        .collect();
    let mut dx = vec![T::zero(); channels * h * w];
    for c in 0..channels {
        let src = &dxp[c * ph * pw..(c + 1) * ph * pw];
        let plane = &mut dx[c * h * w..(c + 1) * h * w];
        for i in 0..ph {
            let dst_row = reflect_index(i as isize - pad as isize, h);
            let row = &src[i * pw..(i + 1) * pw];
            let dst = &mut plane[dst_row * w..(dst_row + 1) * w];
            for (d, &g) in dst.iter_mut().zip(&row[pad..pad + w]) {
                *d += g;
            }
            for j in (0..pad).chain(pad + w..pw) {
                dst[col_src[j]] += row[j];
            }
        }
    }
    dx
}

/// Depthwise `k×k` convolution with reflect padding; spatial size preserved.
/// `weight` is `[channels, k, k]`.
pub fn depthwise_forward<T: Scalar>(
    weight: &[T],
    bias: &[T],
    x: &[T],
    channels: usize,
    h: usize,
    w: usize,
    k: usize,
) -> Vec<T> {
    debug_assert!(k % 2 == 1);
    let pad = k / 2;
    let xp = pad_reflect(x, channels, h, w, pad);
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut y = vec![T::zero(); channels * h * w];
    for c in 0..channels {
        let src = &xp[c * ph * pw..(c + 1) * ph * pw];
        let out = &mut y[c * h * w..(c + 1) * h * w];
        out.iter_mut().for_each(|v| *v = bias[c]);
        let kern = &weight[c * k * k..(c + 1) * k * k];
        for ky in 0..k {
            for kx in 0..k {
                let wv = kern[ky * k + kx];
                for i in 0..h {
                    let s = &src[(i + ky) * pw + kx..(i + ky) * pw + kx + w];
                    let o = &mut out[i * w..(i + 1) * w];
                    for (ov, &sv) in o.iter_mut().zip(s) {
                        *ov += wv * sv;
                    }
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn depthwise_backward<T: Scalar>(
    weight: &[T],
    x: &[T],
    channels: usize,
    h: usize,
    w: usize,
    k: usize,
    dy: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let pad = k / 2;
    let xp = pad_reflect(x, channels, h, w, pad);
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut dxp = vec![T::zero(); channels * ph * pw];
    let mut lanes = vec![T::zero(); w];
    for c in 0..channels {
        let src = &xp[c * ph * pw..(c + 1) * ph * pw];
        let g = &dy[c * h * w..(c + 1) * h * w];
        let dsrc = &mut dxp[c * ph * pw..(c + 1) * ph * pw];
        dbias[c] += g.iter().copied().sum::<T>();
        let kern = &weight[c * k * k..(c + 1) * k * k];
        let dkern = &mut dweight[c * k * k..(c + 1) * k * k];
        for ky in 0..k {
            for kx in 0..k {
                let wv = kern[ky * k + kx];
                lanes.iter_mut().for_each(|v| *v = T::zero());
                for i in 0..h {
                    let off = (i + ky) * pw + kx;
                    let gr = &g[i * w..(i + 1) * w];
                    let s = &src[off..off + w];
                    for ((l, &a), &b) in lanes.iter_mut().zip(gr).zip(s) {
                        *l += a * b;
                    }
                    let d = &mut dsrc[off..off + w];
                    for (dv, &gv) in d.iter_mut().zip(gr) {
                        *dv += wv * gv;
                    }
                }
                dkern[ky * k + kx] += lanes.iter().copied().sum::<T>();
            }
        }
    }
    pad_reflect_adjoint(&dxp, channels, h, w, pad)
}
