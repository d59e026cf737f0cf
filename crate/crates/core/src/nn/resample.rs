use crate::scalar::Scalar;

/// Two-tap linear interpolation weights along one axis.
///
/// Output sample `o` reads `(1 - frac[o]) * src[lo[o]] + frac[o] * src[hi[o]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTaps {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub frac: Vec<f64>,
}

impl LinearTaps {
    /// Sample positions given in source-index units; positions are clamped
    /// to `[0, n - 1]`.
    pub fn from_positions(positions: impl IntoIterator<Item = f64>, n: usize) -> Self {
        assert!(n > 0);
        let mut taps = LinearTaps {
            lo: Vec::new(),
            hi: Vec::new(),
            frac: Vec::new(),
        };
        let max = (n - 1) as f64;
        for p in positions {
            let p = p.clamp(0.0, max);
            let lo = p.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            taps.lo.push(lo);
            taps.hi.push(hi);
            taps.frac.push(if hi == lo { 0.0 } else { p - lo as f64 });
        }
        taps
    }

    /// Half-pixel-centred resize from `n_in` to `n_out` samples
    /// (the `align_corners = false` convention).
    pub fn resize(n_in: usize, n_out: usize) -> Self {
        let scale = n_in as f64 / n_out as f64;
        Self::from_positions((0..n_out).map(|o| ((o as f64 + 0.5) * scale - 0.5).max(0.0)), n_in)
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }
}

/// Separable bilinear resize of a planar `[channels, h, w]` map.
pub fn bilinear_resize<T: Scalar>(
    x: &[T],
    channels: usize,
    h: usize,
    w: usize,
    rows: &LinearTaps,
    cols: &LinearTaps,
) -> Vec<T> {
    let (oh, ow) = (rows.len(), cols.len());
    let cf: Vec<T> = cols.frac.iter().map(|&f| T::lit(f)).collect();
    let rf: Vec<T> = rows.frac.iter().map(|&f| T::lit(f)).collect();
    let mut tmp = vec![T::zero(); channels * h * ow];
    for (src, dst) in x.chunks_exact(w).zip(tmp.chunks_exact_mut(ow)) {
        for o in 0..ow {
            let f = cf[o];
            dst[o] = (T::one() - f) * src[cols.lo[o]] + f * src[cols.hi[o]];
        }
    }
    let mut out = vec![T::zero(); channels * oh * ow];
    for c in 0..channels {
        let t = &tmp[c * h * ow..(c + 1) * h * ow];
        let o = &mut out[c * oh * ow..(c + 1) * oh * ow];
        for r in 0..oh {
            let f = rf[r];
            let a = &t[rows.lo[r] * ow..(rows.lo[r] + 1) * ow];
            let b = &t[rows.hi[r] * ow..(rows.hi[r] + 1) * ow];
            for ((d, &av), &bv) in o[r * ow..(r + 1) * ow].iter_mut().zip(a).zip(b) {
                *d = (T::one() - f) * av + f * bv;
            }
        }
    }
    out
}

/// Adjoint of [`bilinear_resize`].
pub fn bilinear_resize_adjoint<T: Scalar>(
    dy: &[T],
    channels: usize,
    h: usize,
    w: usize,
    rows: &LinearTaps,
    cols: &LinearTaps,
) -> Vec<T> {
    let (oh, ow) = (rows.len(), cols.len());
    let cf: Vec<T> = cols.frac.iter().map(|&f| T::lit(f)).collect();
    let rf: Vec<T> = rows.frac.iter().map(|&f| T::lit(f)).collect();
    let mut tmp = vec![T::zero(); channels * h * ow];
    for c in 0..channels {
        let g = &dy[c * oh * ow..(c + 1) * oh * ow];
        let t = &mut tmp[c * h * ow..(c + 1) * h * ow];
        for r in 0..oh {
            let f = rf[r];
            let gr = &g[r * ow..(r + 1) * ow];
            let (lo, hi) = (rows.lo[r], rows.hi[r]);
            for (d, &gv) in t[lo * ow..(lo + 1) * ow].iter_mut().zip(gr) {
                *d += (T::one() - f) * gv;
            }
            for (d, &gv) in t[hi * ow..(hi + 1) * ow].iter_mut().zip(gr) {
                *d += f * gv;
            }
        }
    }
    let mut dx = vec![T::zero(); channels * h * w];
    for (src, dst) in tmp.chunks_exact(ow).zip(dx.chunks_exact_mut(w)) {
        for o in 0..ow {
            let f = cf[o];
            dst[cols.lo[o]] += (T::one() - f) * src[o];
            dst[cols.hi[o]] += f * src[o];
        }
    }
    dx
}

pub fn bilinear_upsample<T: Scalar>(x: &[T], channels: usize, h: usize, w: usize, factor: usize) -> Vec<T> {
    let rows = LinearTaps::resize(h, h * factor);
    let cols = LinearTaps::resize(w, w * factor);
    bilinear_resize(x, channels, h, w, &rows, &cols)
}

pub fn bilinear_upsample_adjoint<T: Scalar>(
    dy: &[T],
    channels: usize,
    h: usize,
    w: usize,
    factor: usize,
) -> Vec<T> {
    let rows = LinearTaps::resize(h, h * factor);
    let cols = LinearTaps::resize(w, w * factor);
    bilinear_resize_adjoint(dy, channels, h, w, &rows, &cols)
}

/// `[c·f², h, w] -> [c, f·h, f·w]`; input channel `c·f² + i·f + j` fills
/// output offset `(i, j)` of each `f×f` block.
pub fn pixel_shuffle<T: Scalar>(x: &[T], out_channels: usize, h: usize, w: usize, f: usize) -> Vec<T> {
    let (oh, ow) = (h * f, w * f);
    let mut y = vec![T::zero(); out_channels * oh * ow];
    for c in 0..out_channels {
        for i in 0..f {
            for j in 0..f {
                let src = &x[((c * f + i) * f + j) * h * w..][..h * w];
                let dst = &mut y[c * oh * ow..(c + 1) * oh * ow];
                for r in 0..h {
                    let drow = &mut dst[(r * f + i) * ow..(r * f + i + 1) * ow];
                    for (q, &v) in src[r * w..(r + 1) * w].iter().enumerate() {
                        drow[q * f + j] = v;
                    }
                }
            }
        }
    }
    y
}

/// Inverse (and adjoint) of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Scalar>(y: &[T], out_channels: usize, h: usize, w: usize, f: usize) -> Vec<T> {
    let (oh, ow) = (h * f, w * f);
    let mut x = vec![T::zero(); out_channels * f * f * h * w];
    for c in 0..out_channels {
        for i in 0..f {
            for j in 0..f {
                let dst = &mut x[((c * f + i) * f + j) * h * w..][..h * w];
                let src = &y[c * oh * ow..(c + 1) * oh * ow];
                for r in 0..h {
                    let srow = &src[(r * f + i) * ow..(r * f + i + 1) * ow];
                    for (q, d) in dst[r * w..(r + 1) * w].iter_mut().enumerate() {
                        *d = srow[q * f + j];
                    }
                }
            }
        }
    }
    x
}
