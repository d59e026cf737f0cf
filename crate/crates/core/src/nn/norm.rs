use crate::scalar::Scalar;

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Per-pixel statistics kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache<T> {
    pub normalized: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Layer normalization across channels at every pixel of a planar map,
/// followed by a per-channel affine transform.
pub fn layer_norm_forward<T: Scalar>(
    x: &[T],
    gamma: &[T],
    beta: &[T],
    channels: usize,
    pixels: usize,
) -> (Vec<T>, LayerNormCache<T>) {
    let inv_c = T::one() / T::lit(channels as f64);
    let mut mean = vec![T::zero(); pixels];
    for plane in x.chunks_exact(pixels) {
        for (m, &v) in mean.iter_mut().zip(plane) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_c);
    let mut var = vec![T::zero(); pixels];
    for plane in x.chunks_exact(pixels) {
        for ((s, &v), &m) in var.iter_mut().zip(plane).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let eps = T::lit(LAYER_NORM_EPS);
    let inv_std: Vec<T> = var.iter().map(|&s| T::one() / (s * inv_c + eps).sqrt()).collect();
    let mut normalized = vec![T::zero(); channels * pixels];
    let mut y = vec![T::zero(); channels * pixels];
    for c in 0..channels {
        let src = &x[c * pixels..(c + 1) * pixels];
        let n = &mut normalized[c * pixels..(c + 1) * pixels];
        let o = &mut y[c * pixels..(c + 1) * pixels];
        for p in 0..pixels {
            n[p] = (src[p] - mean[p]) * inv_std[p];
            o[p] = gamma[c] * n[p] + beta[c];
        }
    }
    (y, LayerNormCache { normalized, inv_std })
}

pub fn layer_norm_backward<T: Scalar>(
    cache: &LayerNormCache<T>,
    gamma: &[T],
    channels: usize,
    pixels: usize,
    dy: &[T],
    dgamma: &mut [T],
    dbeta: &mut [T],
) -> Vec<T> {
    let inv_c = T::one() / T::lit(channels as f64);
    let mut mean_g = vec![T::zero(); pixels];
    let mut mean_gn = vec![T::zero(); pixels];
    for c in 0..channels {
        let g = &dy[c * pixels..(c + 1) * pixels];
        let n = &cache.normalized[c * pixels..(c + 1) * pixels];
        let mut dg = T::zero();
        let mut db = T::zero();
        for p in 0..pixels {
            dg += g[p] * n[p];
            db += g[p];
            let gh = g[p] * gamma[c];
            mean_g[p] += gh;
            mean_gn[p] += gh * n[p];
        }
        dgamma[c] += dg;
        dbeta[c] += db;
    }
    let mut dx = vec![T::zero(); channels * pixels];
    for c in 0..channels {
        let g = &dy[c * pixels..(c + 1) * pixels];
        let n = &cache.normalized[c * pixels..(c + 1) * pixels];
        let d = &mut dx[c * pixels..(c + 1) * pixels];
        for p in 0..pixels {
            let gh = g[p] * gamma[c];
            d[p] = cache.inv_std[p] * (gh - mean_g[p] * inv_c - n[p] * mean_gn[p] * inv_c);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_each_pixel_across_channels() {
        let (c, p) = (4, 3);
        let x: Vec<f64> = (0..c * p).map(|i| (i as f64 * 1.3).sin() * 5.0).collect();
        let (y, _) = layer_norm_forward(&x, &[1.0; 4], &[0.0; 4], c, p);
        for px in 0..p {
            let vals: Vec<f64> = (0..c).map(|ch| y[ch * p + px]).collect();
            let mean: f64 = vals.iter().sum::<f64>() / c as f64;
            let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (c, p) = (3, 2);
        let x: Vec<f64> = (0..c * p).map(|i| (i as f64 * 0.7).cos()).collect();
        let gamma = vec![0.5, 1.5, -0.7];
        let beta = vec![0.1, 0.0, 0.3];
        let up: Vec<f64> = (0..c * p).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = |x: &[f64]| -> f64 {
            let (y, _) = layer_norm_forward(x, &gamma, &beta, c, p);
            y.iter().zip(&up).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = layer_norm_forward(&x, &gamma, &beta, c, p);
        let mut dg = vec![0.0; c];
        let mut db = vec![0.0; c];
        let dx = layer_norm_backward(&cache, &gamma, c, p, &up, &mut dg, &mut db);
        for i in 0..x.len() {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (f(&a) - f(&b)) / 2e-6;
            assert!((fd - dx[i]).abs() < 1e-6, "{i}: {fd} vs {}", dx[i]);
        }
    }
}
