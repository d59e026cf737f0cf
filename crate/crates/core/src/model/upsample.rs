//! Hybrid upsampling: a fixed bilinear path plus a learnable
//! pointwise → pixel-shuffle → depthwise path, summed.

use crate::nn::{
    bilinear_upsample, bilinear_upsample_adjoint, depthwise_backward, depthwise_forward,
    pixel_shuffle, pixel_unshuffle, pointwise_backward, pointwise_forward,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::config::UpsampleMode;

#[derive(Clone, Debug, PartialEq)]
pub struct LearnableBranch<T> {
    pub pw_weight: Tensor<T>,
    pub pw_bias: Tensor<T>,
    pub dw_weight: Tensor<T>,
    pub dw_bias: Tensor<T>,
}

impl<T: Scalar> LearnableBranch<T> {
    pub fn zeros(cin: usize, cout: usize, factor: usize, kernel: usize) -> Self {
        let f2 = factor * factor;
        Self {
            pw_weight: Tensor::zeros(&[cout * f2, cin]),
            pw_bias: Tensor::zeros(&[cout * f2]),
            dw_weight: Tensor::zeros(&[cout, kernel, kernel]),
            dw_bias: Tensor::zeros(&[cout]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridUpsample<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub factor: usize,
    pub kernel: usize,
    pub mode: UpsampleMode,
    pub learnable: Option<LearnableBranch<T>>,
}

pub struct UpsampleCache<T> {
    h: usize,
    w: usize,
    input: Vec<T>,
    shuffled: Vec<T>,
}

/// Fixed `[cout, cin]` projection used by the bilinear path when the channel
/// count changes: contiguous channel groups are averaged when shrinking,
/// channels are repeated cyclically when growing.
pub fn channel_projection(cin: usize, cout: usize) -> Vec<f64> {
    let mut p = vec![0.0; cout * cin];
    if cout <= cin {
        let mut members = vec![0usize; cout];
        for c in 0..cin {
            members[c * cout / cin] += 1;
        }
        for c in 0..cin {
            let o = c * cout / cin;
            p[o * cin + c] = 1.0 / members[o] as f64;
        }
    } else {
        for o in 0..cout {
            p[o * cin + o % cin] = 1.0;
        }
    }
    p
}

impl<T: Scalar> HybridUpsample<T> {
    pub fn zeros(cin: usize, cout: usize, factor: usize, kernel: usize, mode: UpsampleMode) -> Self {
        let learnable = (mode != UpsampleMode::BilinearOnly)
            .then(|| LearnableBranch::zeros(cin, cout, factor, kernel));
        Self {
            in_channels: cin,
            out_channels: cout,
            factor,
            kernel,
            mode,
            learnable,
        }
    }

    fn uses_bilinear(&self) -> bool {
        self.mode != UpsampleMode::LearnableOnly
    }

    fn projection(&self) -> Option<Vec<T>> {
        (self.in_channels != self.out_channels).then(|| {
            channel_projection(self.in_channels, self.out_channels)
                .into_iter()
                .map(T::lit)
                .collect()
        })
    }

    /// Upsampled map `[C_out, f·h, f·w]`.
    pub fn forward(&self, x: &[T], h: usize, w: usize) -> (Vec<T>, UpsampleCache<T>) {
        let (cin, cout, f) = (self.in_channels, self.out_channels, self.factor);
        let (oh, ow) = (h * f, w * f);
        let mut out = vec![T::zero(); cout * oh * ow];
        let mut shuffled = Vec::new();
        if let Some(br) = &self.learnable {
            let a = pointwise_forward(
                br.pw_weight.data(),
                br.pw_bias.data(),
                cin,
                cout * f * f,
                x,
                h * w,
            );
            shuffled = pixel_shuffle(&a, cout, h, w, f);
            out = depthwise_forward(
                br.dw_weight.data(),
                br.dw_bias.data(),
                &shuffled,
                cout,
                oh,
                ow,
                self.kernel,
            );
        }
        if self.uses_bilinear() {
            let up = bilinear_upsample(x, cin, h, w, f);
            match self.projection() {
                None => out.iter_mut().zip(&up).for_each(|(o, &u)| *o += u),
                Some(p) => T::gemm(cout, cin, oh * ow, &p, false, &up, false, &mut out, true),
            }
        }
        let cache = UpsampleCache {
            h,
            w,
            input: x.to_vec(),
            shuffled,
        };
        (out, cache)
    }

    pub fn backward(&self, cache: &UpsampleCache<T>, dy: &[T], grad: &mut Self) -> Vec<T> {
        let (cin, cout, f) = (self.in_channels, self.out_channels, self.factor);
        let (h, w) = (cache.h, cache.w);
        let (oh, ow) = (h * f, w * f);
        let mut dx = vec![T::zero(); cin * h * w];
        if let (Some(br), Some(gbr)) = (&self.learnable, grad.learnable.as_mut()) {
            let d_shuf = depthwise_backward(
                br.dw_weight.data(),
                &cache.shuffled,
                cout,
                oh,
                ow,
                self.kernel,
                dy,
                gbr.dw_weight.data_mut(),
                gbr.dw_bias.data_mut(),
            );
            let da = pixel_unshuffle(&d_shuf, cout, h, w, f);
            dx = pointwise_backward(
                br.pw_weight.data(),
                cin,
                cout * f * f,
                &cache.input,
                h * w,
                &da,
                gbr.pw_weight.data_mut(),
                gbr.pw_bias.data_mut(),
            );
        }
        if self.uses_bilinear() {
            let d_up = match self.projection() {
                None => dy.to_vec(),
                Some(p) => {
                    let mut d = vec![T::zero(); cin * oh * ow];
                    T::gemm(cin, cout, oh * ow, &p, true, dy, false, &mut d, false);
                    d
                }
            };
            let d_in = bilinear_upsample_adjoint(&d_up, cin, h, w, f);
            dx.iter_mut().zip(&d_in).for_each(|(a, &b)| *a += b);
        }
        dx
    }
}
