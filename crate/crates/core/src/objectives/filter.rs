use crate::error::{Error, Result};
use crate::nn::reflect_index;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Normalized 1-D Gaussian taps with half-width `⌈3σ⌉`. The 2-D kernel is
/// the outer product of these taps with itself.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let half = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|v| v / sum).collect())
}

/// Splits a tensor shape into `(planes, height, width)`.
pub(crate) fn planes_of(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "expected at least two spatial dimensions, got shape {shape:?}"
        )));
    }
    let n = shape.len();
    Ok((shape[..n - 2].iter().product(), shape[n - 2], shape[n - 1]))
}

fn blur_plane<T: Scalar>(src: &[T], dst: &mut [T], h: usize, w: usize, taps: &[T]) {
    let half = (taps.len() / 2) as isize;
    let mut tmp = vec![T::zero(); h * w];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &g) in taps.iter().enumerate() {
                acc += g * row[reflect_index(x as isize + k as isize - half, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &g) in taps.iter().enumerate() {
                acc += g * tmp[reflect_index(y as isize + k as isize - half, h) * w + x];
            }
            dst[y * w + x] = acc;
        }
    }
}

fn blur_plane_adjoint<T: Scalar>(dy: &[T], dx: &mut [T], h: usize, w: usize, taps: &[T]) {
    let half = (taps.len() / 2) as isize;
    let mut tmp = vec![T::zero(); h * w];
    for y in 0..h {
        for x in 0..w {
            let g_out = dy[y * w + x];
            for (k, &g) in taps.iter().enumerate() {
                tmp[reflect_index(y as isize + k as isize - half, h) * w + x] += g * g_out;
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            let g_out = tmp[y * w + x];
            for (k, &g) in taps.iter().enumerate() {
                dx[y * w + reflect_index(x as isize + k as isize - half, w)] += g * g_out;
            }
        }
    }
}

/// Gaussian blur over the last two axes with reflect padding.
pub fn gaussian_blur<T: Scalar>(x: &Tensor<T>, sigma: f64) -> Result<Tensor<T>> {
    let taps: Vec<T> = gaussian_kernel(sigma)?.into_iter().map(T::lit).collect();
    let (planes, h, w) = planes_of(x.shape())?;
    let mut out = Tensor::zeros(x.shape());
    for p in 0..planes {
        let r = p * h * w..(p + 1) * h * w;
        blur_plane(&x.data()[r.clone()], &mut out.data_mut()[r], h, w, &taps);
    }
    Ok(out)
}

/// Transpose of [`gaussian_blur`] (differs from the blur itself near the
/// borders because of the reflect padding).
pub fn gaussian_blur_adjoint<T: Scalar>(dy: &Tensor<T>, sigma: f64) -> Result<Tensor<T>> {
    let taps: Vec<T> = gaussian_kernel(sigma)?.into_iter().map(T::lit).collect();
    let (planes, h, w) = planes_of(dy.shape())?;
    let mut out = Tensor::zeros(dy.shape());
    for p in 0..planes {
        let r = p * h * w..(p + 1) * h * w;
        blur_plane_adjoint(&dy.data()[r.clone()], &mut out.data_mut()[r], h, w, &taps);
    }
    Ok(out)
}

/// `x − G_σ(x)`: removes the low-frequency content of every plane.
pub fn high_pass<T: Scalar>(x: &Tensor<T>, sigma: f64) -> Result<Tensor<T>> {
    let blurred = gaussian_blur(x, sigma)?;
    let data = x.data().iter().zip(blurred.data()).map(|(&a, &b)| a - b).collect();
    Tensor::from_vec(x.shape(), data)
}

/// Transpose of [`high_pass`].
pub fn high_pass_adjoint<T: Scalar>(dy: &Tensor<T>, sigma: f64) -> Result<Tensor<T>> {
    let blurred = gaussian_blur_adjoint(dy, sigma)?;
    let data = dy.data().iter().zip(blurred.data()).map(|(&a, &b)| a - b).collect();
    Tensor::from_vec(dy.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_width_and_normalization() {
        let k = gaussian_kernel(1.0).unwrap();
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(0.4).unwrap().len(), 5);
        assert!(gaussian_kernel(0.0).is_err());
        assert!(gaussian_kernel(-1.0).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let (h, w) = (6, 9);
        let x: Vec<f64> = (0..h * w).map(|i| ((i * 37 % 17) as f64) / 17.0 - 0.3).collect();
        let y: Vec<f64> = (0..h * w).map(|i| ((i * 11 % 13) as f64) / 13.0).collect();
        let x = Tensor::from_vec(&[h, w], x).unwrap();
        let y = Tensor::from_vec(&[h, w], y).unwrap();
        let ax = high_pass(&x, 1.3).unwrap();
        let aty = high_pass_adjoint(&y, 1.3).unwrap();
        let lhs: f64 = ax.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(aty.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }
}
