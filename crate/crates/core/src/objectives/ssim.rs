//! Multi-scale structural similarity with an analytic gradient.
//!
//! Per plane and scale the statistics come from an 11×11 Gaussian window
//! (σ = 1.5) applied without padding. Between scales the planes are 2×2
//! average pooled, mirroring the last row/column first when a dimension is
//! odd. Contrast-structure terms of all but the coarsest scale and the full
//! SSIM of the coarsest scale are clipped at zero and combined as a
//! weighted geometric product. The result is averaged over all planes
//! (channels and frames).

use super::filter::planes_of;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Number of scales used for an `h × w` input: five when the smaller side
/// is at least 176, fewer for smaller inputs.
pub fn ms_ssim_levels(h: usize, w: usize) -> Result<usize> {
    let m = h.min(w);
    if m < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ms-ssim needs at least {SSIM_WINDOW}×{SSIM_WINDOW} inputs, got {h}×{w}"
        )));
    }
    let mut levels = 1;
    while levels < MS_SSIM_WEIGHTS.len() && m >> levels >= SSIM_WINDOW {
        levels += 1;
    }
    Ok(levels)
}

/// Canonical scale weights truncated to `levels` and renormalized.
pub fn level_weights(levels: usize) -> Vec<f64> {
    let w = &MS_SSIM_WEIGHTS[..levels];
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn window_taps<T: Scalar>() -> Vec<T> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-0.5 * d * d / (SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| T::lit(v / s)).collect()
}

fn valid_conv<T: Scalar>(src: &[T], h: usize, w: usize, taps: &[T]) -> Vec<T> {
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut tmp = vec![T::zero(); h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = T::zero();
            for (i, &g) in taps.iter().enumerate() {
                acc += g * src[y * w + x + i];
            }
            tmp[y * ow + x] = acc;
        }
    }
    let mut out = vec![T::zero(); oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = T::zero();
            for (i, &g) in taps.iter().enumerate() {
                acc += g * tmp[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

fn valid_conv_adjoint<T: Scalar>(d: &[T], h: usize, w: usize, taps: &[T]) -> Vec<T> {
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut tmp = vec![T::zero(); h * ow];
    for y in 0..oh {
        for x in 0..ow {
            let v = d[y * ow + x];
            for (i, &g) in taps.iter().enumerate() {
                tmp[(y + i) * ow + x] += g * v;
            }
        }
    }
    let mut out = vec![T::zero(); h * w];
    for y in 0..h {
        for x in 0..ow {
            let v = tmp[y * ow + x];
            for (i, &g) in taps.iter().enumerate() {
                out[y * w + x + i] += g * v;
            }
        }
    }
    out
}

fn downsample<T: Scalar>(src: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); oh * ow];
    for y in 0..oh {
        let (y0, y1) = (2 * y, (2 * y + 1).min(h - 1));
        for x in 0..ow {
            let (x0, x1) = (2 * x, (2 * x + 1).min(w - 1));
            out[y * ow + x] =
                (src[y0 * w + x0] + src[y0 * w + x1] + src[y1 * w + x0] + src[y1 * w + x1]) * quarter;
        }
    }
    (out, oh, ow)
}

fn downsample_adjoint<T: Scalar>(d: &[T], h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); h * w];
    for y in 0..oh {
        let (y0, y1) = (2 * y, (2 * y + 1).min(h - 1));
        for x in 0..ow {
            let (x0, x1) = (2 * x, (2 * x + 1).min(w - 1));
            let v = d[y * ow + x] * quarter;
            out[y0 * w + x0] += v;
            out[y0 * w + x1] += v;
            out[y1 * w + x0] += v;
            out[y1 * w + x1] += v;
        }
    }
    out
}

struct Scale<T> {
    x: Vec<T>,
    y: Vec<T>,
    h: usize,
    w: usize,
    a: Vec<T>,
    b: Vec<T>,
    p: Vec<T>,
    q: Vec<T>,
}

impl<T: Scalar> Scale<T> {
    fn new(x: Vec<T>, y: Vec<T>, h: usize, w: usize, taps: &[T]) -> Self {
        let xy: Vec<T> = x.iter().zip(&y).map(|(&u, &v)| u * v).collect();
        let sq: Vec<T> = x.iter().zip(&y).map(|(&u, &v)| u * u + v * v).collect();
        let two = T::lit(2.0);
        Self {
            a: valid_conv(&x, h, w, taps),
            b: valid_conv(&y, h, w, taps),
            p: valid_conv(&xy, h, w, taps).into_iter().map(|v| v * two).collect(),
            q: valid_conv(&sq, h, w, taps),
            x,
            y,
            h,
            w,
        }
    }

    /// Mean contrast-structure and mean SSIM over all window positions.
    fn means(&self) -> (T, T) {
        let (c1, c2) = (T::lit(K1 * K1), T::lit(K2 * K2));
        let two = T::lit(2.0);
        let mut cs_sum = T::zero();
        let mut ssim_sum = T::zero();
        for i in 0..self.a.len() {
            let (a, b) = (self.a[i], self.b[i]);
            let num0 = a * b * two;
            let den0 = a * a + b * b;
            let lum = (num0 + c1) / (den0 + c1);
            let cs = (self.p[i] - num0 + c2) / (self.q[i] - den0 + c2);
            cs_sum += cs;
            ssim_sum += lum * cs;
        }
        let n = T::lit(self.a.len() as f64);
        (cs_sum / n, ssim_sum / n)
    }

    /// Gradient with respect to `x` of `coef · mean(cs)` or, when
    /// `with_luminance`, of `coef · mean(lum · cs)`.
    fn grad_x(&self, coef: T, with_luminance: bool, taps: &[T]) -> Vec<T> {
        let (c1, c2) = (T::lit(K1 * K1), T::lit(K2 * K2));
        let two = T::lit(2.0);
        let n = self.a.len();
        let scale = coef / T::lit(n as f64);
        let mut da = vec![T::zero(); n];
        let mut dp = vec![T::zero(); n];
        let mut dq = vec![T::zero(); n];
        for i in 0..n {
            let (a, b) = (self.a[i], self.b[i]);
            let num0 = a * b * two;
            let den0 = a * a + b * b;
            let num = self.p[i] - num0 + c2;
            let den = self.q[i] - den0 + c2;
            let cs = num / den;
            let dcs_da = (-two * b) / den + two * a * num / (den * den);
            let dcs_dp = T::one() / den;
            let dcs_dq = -num / (den * den);
            if with_luminance {
                let ln = num0 + c1;
                let ld = den0 + c1;
                let lum = ln / ld;
                let dlum_da = two * b / ld - ln * two * a / (ld * ld);
                da[i] = scale * (dlum_da * cs + lum * dcs_da);
                dp[i] = scale * lum * dcs_dp;
                dq[i] = scale * lum * dcs_dq;
            } else {
                da[i] = scale * dcs_da;
                dp[i] = scale * dcs_dp;
                dq[i] = scale * dcs_dq;
            }
        }
        // p carries a factor 2 and q = G(x² + y²).
        let ga = valid_conv_adjoint(&da, self.h, self.w, taps);
        let gp = valid_conv_adjoint(&dp, self.h, self.w, taps);
        let gq = valid_conv_adjoint(&dq, self.h, self.w, taps);
        (0..self.x.len())
            .map(|j| ga[j] + two * self.y[j] * gp[j] + two * self.x[j] * gq[j])
            .collect()
    }
}

fn plane<T: Scalar>(
    x: &[T],
    y: &[T],
    h: usize,
    w: usize,
    levels: usize,
    taps: &[T],
    want_grad: bool,
) -> (T, Option<Vec<T>>) {
    let weights: Vec<T> = level_weights(levels).into_iter().map(T::lit).collect();
    let mut scales = Vec::with_capacity(levels);
    scales.push(Scale::new(x.to_vec(), y.to_vec(), h, w, taps));
    for _ in 1..levels {
        let prev = scales.last().expect("non-empty");
        let (nx, oh, ow) = downsample(&prev.x, prev.h, prev.w);
        let (ny, _, _) = downsample(&prev.y, prev.h, prev.w);
        scales.push(Scale::new(nx, ny, oh, ow, taps));
    }
    let factors: Vec<T> = scales
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let (cs, ssim) = s.means();
            let v = if j + 1 == levels { ssim } else { cs };
            v.max(T::zero())
        })
        .collect();
    let value = factors
        .iter()
        .zip(&weights)
        .fold(T::one(), |acc, (&f, &wt)| acc * f.powf(wt));
    if !want_grad {
        return (value, None);
    }
    let mut carry: Option<Vec<T>> = None;
    for j in (0..levels).rev() {
        let s = &scales[j];
        let mut g = match carry.take() {
            Some(c) => downsample_adjoint(&c, s.h, s.w),
            None => vec![T::zero(); s.h * s.w],
        };
        if factors[j] > T::zero() {
            let coef = weights[j] * value / factors[j];
            let local = s.grad_x(coef, j + 1 == levels, taps);
            g.iter_mut().zip(local).for_each(|(a, b)| *a += b);
        }
        carry = Some(g);
    }
    (value, carry)
}

fn run<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>, want_grad: bool) -> Result<(T, Option<Tensor<T>>)> {
    if x.shape() != y.shape() {
        return Err(Error::shape(x.shape(), y.shape()));
    }
    let (planes, h, w) = planes_of(x.shape())?;
    let levels = ms_ssim_levels(h, w)?;
    let taps = window_taps::<T>();
    let n = T::lit(planes as f64);
    let mut total = T::zero();
    let mut grad = want_grad.then(|| Tensor::zeros(x.shape()));
    for p in 0..planes {
        let r = p * h * w..(p + 1) * h * w;
        let (v, g) = plane(&x.data()[r.clone()], &y.data()[r.clone()], h, w, levels, &taps, want_grad);
        total += v;
        if let (Some(dst), Some(g)) = (grad.as_mut(), g) {
            dst.data_mut()[r]
                .iter_mut()
                .zip(g)
                .for_each(|(d, s)| *d = s / n);
        }
    }
    Ok((total / n, grad))
}

/// Mean MS-SSIM over all planes of `x` against `y` (dynamic range 1).
pub fn ms_ssim<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>) -> Result<T> {
    Ok(run(x, y, false)?.0)
}

/// MS-SSIM together with its gradient with respect to `x`.
pub fn ms_ssim_with_grad<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let (v, g) = run(x, y, true)?;
    Ok((v, g.expect("gradient requested")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_count() {
        assert_eq!(ms_ssim_levels(192, 192).unwrap(), 5);
        assert_eq!(ms_ssim_levels(176, 400).unwrap(), 5);
        assert_eq!(ms_ssim_levels(175, 400).unwrap(), 4);
        assert_eq!(ms_ssim_levels(32, 32).unwrap(), 2);
        assert_eq!(ms_ssim_levels(11, 11).unwrap(), 1);
        assert!(ms_ssim_levels(10, 64).is_err());
    }

    #[test]
    fn weights_renormalize() {
        let w = level_weights(2);
        assert!((w[0] + w[1] - 1.0).abs() < 1e-15);
        assert!((w[1] / w[0] - 0.2856 / 0.0448).abs() < 1e-12);
    }

    #[test]
    fn conv_adjoint_identity() {
        let taps = window_taps::<f64>();
        let (h, w) = (14, 17);
        let x: Vec<f64> = (0..h * w).map(|i| ((i * 31 % 23) as f64) / 23.0).collect();
        let d: Vec<f64> = (0..4 * 7).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let lhs: f64 = valid_conv(&x, h, w, &taps).iter().zip(&d).map(|(a, b)| a * b).sum();
        let rhs: f64 = valid_conv_adjoint(&d, h, w, &taps).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn pool_adjoint_identity_odd() {
        let (h, w) = (5, 7);
        let x: Vec<f64> = (0..h * w).map(|i| (i as f64).sin()).collect();
        let (y, oh, ow) = downsample(&x, h, w);
        assert_eq!((oh, ow), (3, 4));
        let d: Vec<f64> = (0..oh * ow).map(|i| (i as f64).cos()).collect();
        let lhs: f64 = y.iter().zip(&d).map(|(a, b)| a * b).sum();
        let rhs: f64 = downsample_adjoint(&d, h, w).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
