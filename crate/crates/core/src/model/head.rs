use crate::nn::{gelu, gelu_grad, pointwise_backward, pointwise_forward, sigmoid};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::config::OutputActivation;

/// Pointwise projection of stage features to RGB in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionHead<T> {
    pub channels: usize,
    pub activation: OutputActivation,
    pub hidden: Option<(Tensor<T>, Tensor<T>)>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub struct HeadCache<T> {
    pixels: usize,
    input: Vec<T>,
    hidden_pre: Vec<T>,
    hidden_act: Vec<T>,
    logits: Vec<T>,
    output: Vec<T>,
}

impl<T: Scalar> ProjectionHead<T> {
    pub fn zeros(channels: usize, hidden: usize, activation: OutputActivation) -> Self {
        let hidden_layer =
            (hidden > 0).then(|| (Tensor::zeros(&[hidden, channels]), Tensor::zeros(&[hidden])));
        let width = if hidden > 0 { hidden } else { channels };
        Self {
            channels,
            activation,
            hidden: hidden_layer,
            weight: Tensor::zeros(&[3, width]),
            bias: Tensor::zeros(&[3]),
        }
    }

    /// Planar `[3, h, w]` prediction.
    pub fn forward(&self, x: &[T], pixels: usize) -> (Vec<T>, HeadCache<T>) {
        let mut hidden_pre = Vec::new();
        let mut hidden_act = Vec::new();
        let (feat, width): (&[T], usize) = match &self.hidden {
            Some((w, b)) => {
                let hid = w.shape()[0];
                hidden_pre = pointwise_forward(w.data(), b.data(), self.channels, hid, x, pixels);
                hidden_act = hidden_pre.iter().map(|&v| gelu(v)).collect();
                (&hidden_act, hid)
            }
            None => (x, self.channels),
        };
        let logits = pointwise_forward(self.weight.data(), self.bias.data(), width, 3, feat, pixels);
        let output: Vec<T> = match self.activation {
            OutputActivation::Sigmoid => logits.iter().map(|&v| sigmoid(v)).collect(),
            OutputActivation::Clamp => logits.iter().map(|&v| v.max(T::zero()).min(T::one())).collect(),
        };
        let cache = HeadCache {
            pixels,
            input: x.to_vec(),
            hidden_pre,
            hidden_act,
            logits,
            output: output.clone(),
        };
        (output, cache)
    }

    pub fn backward(&self, cache: &HeadCache<T>, dy: &[T], grad: &mut Self) -> Vec<T> {
        let p = cache.pixels;
        let d_logits: Vec<T> = match self.activation {
            OutputActivation::Sigmoid => dy
                .iter()
                .zip(&cache.output)
                .map(|(&g, &s)| g * s * (T::one() - s))
                .collect(),
            OutputActivation::Clamp => dy
                .iter()
                .zip(&cache.logits)
                .map(|(&g, &v)| if v >= T::zero() && v <= T::one() { g } else { T::zero() })
                .collect(),
        };
        match (&self.hidden, grad.hidden.as_mut()) {
            (Some((w1, _)), Some((gw1, gb1))) => {
                let hid = w1.shape()[0];
                let mut d_hidden = pointwise_backward(
                    self.weight.data(),
                    hid,
                    3,
                    &cache.hidden_act,
                    p,
                    &d_logits,
                    grad.weight.data_mut(),
                    grad.bias.data_mut(),
                );
                for (d, &v) in d_hidden.iter_mut().zip(&cache.hidden_pre) {
                    *d *= gelu_grad(v);
                }
                pointwise_backward(
                    w1.data(),
                    self.channels,
                    hid,
                    &cache.input,
                    p,
                    &d_hidden,
                    gw1.data_mut(),
                    gb1.data_mut(),
                )
            }
            _ => pointwise_backward(
                self.weight.data(),
                self.channels,
                3,
                &cache.input,
                p,
                &d_logits,
                grad.weight.data_mut(),
                grad.bias.data_mut(),
            ),
        }
    }
}
