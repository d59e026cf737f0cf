//! Frequency-aware layer: large-kernel depthwise convolution, layer norm and
//! a pointwise MLP, with a residual from the depthwise output to the MLP
//! output and an outer residual from the block input.

use crate::nn::{
    depthwise_backward, depthwise_forward, gelu, gelu_grad, layer_norm_backward,
    layer_norm_forward, pointwise_backward, pointwise_forward, LayerNormCache,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Falayer<T> {
    pub channels: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub dw_weight: Tensor<T>,
    pub dw_bias: Tensor<T>,
    pub ln_weight: Tensor<T>,
    pub ln_bias: Tensor<T>,
    pub fc1_weight: Tensor<T>,
    pub fc1_bias: Tensor<T>,
    pub fc2_weight: Tensor<T>,
    pub fc2_bias: Tensor<T>,
}

pub struct FalayerCache<T> {
    h: usize,
    w: usize,
    input: Vec<T>,
    ln: LayerNormCache<T>,
    normed: Vec<T>,
    pre_act: Vec<T>,
    act: Vec<T>,
}

impl<T: Scalar> Falayer<T> {
    pub fn zeros(channels: usize, hidden: usize, kernel: usize) -> Self {
        Self {
            channels,
            hidden,
            kernel,
            dw_weight: Tensor::zeros(&[channels, kernel, kernel]),
            dw_bias: Tensor::zeros(&[channels]),
            ln_weight: Tensor::full(&[channels], T::one()),
            ln_bias: Tensor::zeros(&[channels]),
            fc1_weight: Tensor::zeros(&[hidden, channels]),
            fc1_bias: Tensor::zeros(&[hidden]),
            fc2_weight: Tensor::zeros(&[channels, hidden]),
            fc2_bias: Tensor::zeros(&[channels]),
        }
    }

    /// `y = x + y_dw + MLP(LN(y_dw))` with `y_dw = DWConv(x)`.
    pub fn forward(&self, x: &[T], h: usize, w: usize) -> (Vec<T>, FalayerCache<T>) {
        let (c, hid, p) = (self.channels, self.hidden, h * w);
        let y_dw = depthwise_forward(
            self.dw_weight.data(),
            self.dw_bias.data(),
            x,
            c,
            h,
            w,
            self.kernel,
        );
        let (normed, ln) =
            layer_norm_forward(&y_dw, self.ln_weight.data(), self.ln_bias.data(), c, p);
        let pre_act = pointwise_forward(
            self.fc1_weight.data(),
            self.fc1_bias.data(),
            c,
            hid,
            &normed,
            p,
        );
        let act: Vec<T> = pre_act.iter().map(|&v| gelu(v)).collect();
        let mut out = pointwise_forward(
            self.fc2_weight.data(),
            self.fc2_bias.data(),
            hid,
            c,
            &act,
            p,
        );
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(&y_dw) {
            *o += a + b;
        }
        let cache = FalayerCache {
            h,
            w,
            input: x.to_vec(),
            ln,
            normed,
            pre_act,
            act,
        };
        (out, cache)
    }

    pub fn backward(&self, cache: &FalayerCache<T>, dy: &[T], grad: &mut Self) -> Vec<T> {
        let (c, hid) = (self.channels, self.hidden);
        let (h, w) = (cache.h, cache.w);
        let p = h * w;
        let mut d_act = pointwise_backward(
            self.fc2_weight.data(),
            hid,
            c,
            &cache.act,
            p,
            dy,
            grad.fc2_weight.data_mut(),
            grad.fc2_bias.data_mut(),
        );
        for (d, &a) in d_act.iter_mut().zip(&cache.pre_act) {
            *d *= gelu_grad(a);
        }
        let d_normed = pointwise_backward(
            self.fc1_weight.data(),
            c,
            hid,
            &cache.normed,
            p,
            &d_act,
            grad.fc1_weight.data_mut(),
            grad.fc1_bias.data_mut(),
        );
        let mut d_dw = layer_norm_backward(
            &cache.ln,
            self.ln_weight.data(),
            c,
            p,
            &d_normed,
            grad.ln_weight.data_mut(),
            grad.ln_bias.data_mut(),
        );
        d_dw.iter_mut().zip(dy).for_each(|(a, &b)| *a += b);
        let mut dx = depthwise_backward(
            self.dw_weight.data(),
            &cache.input,
            c,
            h,
            w,
            self.kernel,
            &d_dw,
            grad.dw_weight.data_mut(),
            grad.dw_bias.data_mut(),
        );
        dx.iter_mut().zip(dy).for_each(|(a, &b)| *a += b);
        dx
    }
}
