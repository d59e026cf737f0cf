use serde::{Deserialize, Serialize};

use crate::model::Model;

/// Adam with bias correction; moments share the model's layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Model<f32>,
    pub v: Model<f32>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(model: &Model<f32>) -> Self {
        Self {
            m: model.zeros_like(),
            v: model.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn update(&mut self, params: &mut Model<f32>, grads: &Model<f32>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let step_size = (lr / c1) as f32;
        let c2_sqrt = c2.sqrt() as f32;
        let eps = self.eps as f32;
        let grads = grads.params();
        for (((_, p), (_, g)), ((_, m), (_, v))) in params
            .params_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.params_mut().into_iter().zip(self.v.params_mut()))
        {
            for (((w, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= step_size * *m / (v.sqrt() / c2_sqrt + eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Linear warmup, then cosine decay to `min_lr_ratio · lr`.
    #[default]
    CosineWithWarmup,
}

/// Learning rate at optimizer step `step` (0-based) of `total` steps.
pub fn learning_rate(lr: f64, min_ratio: f64, warmup_steps: usize, total: usize, step: usize) -> f64 {
    if step < warmup_steps {
        return lr * (step + 1) as f64 / warmup_steps as f64;
    }
    let span = total.saturating_sub(warmup_steps).max(1);
    let p = ((step - warmup_steps) as f64 / span as f64).min(1.0);
    let floor = lr * min_ratio;
    floor + (lr - floor) * 0.5 * (1.0 + (std::f64::consts::PI * p).cos())
}
