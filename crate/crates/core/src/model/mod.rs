//! The coordinate network: feature-grid embedding, a cascade of
//! upsampling blocks with frequency-aware layers, and one projection head
//! per stage.

mod config;
mod falayer;
mod grid;
mod head;
mod upsample;

pub mod checkpoint;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::video_io::PatchCoordinate;

pub use config::{GridSpec, ModelConfig, OutputActivation, ParamCount, UpsampleMode};
pub use falayer::{Falayer, FalayerCache};
pub use grid::{grid_lookup, GridSample};
pub use head::{HeadCache, ProjectionHead};
pub use upsample::{channel_projection, HybridUpsample, LearnableBranch, UpsampleCache};

/// Grid entries start uniform in `[-GRID_INIT, GRID_INIT]`.
pub const GRID_INIT: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct Stage<T> {
    pub upsample: HybridUpsample<T>,
    pub falayers: Vec<Falayer<T>>,
    pub head: ProjectionHead<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    pub grids: Vec<Tensor<T>>,
    pub stages: Vec<Stage<T>>,
}

struct StageTrace<T> {
    h: usize,
    w: usize,
    upsample: UpsampleCache<T>,
    falayers: Vec<FalayerCache<T>>,
    head: Option<HeadCache<T>>,
}

/// Everything the backward pass needs from one forward evaluation.
pub struct Trace<T> {
    plans: Vec<GridSample>,
    stages: Vec<StageTrace<T>>,
}

/// Result of a (possibly truncated) forward pass.
pub struct ForwardPass<T> {
    /// Stage outputs `X_1 … X_k` for the executed stages.
    pub features: Vec<Vec<T>>,
    /// Planar `[3, h_i, w_i]` head outputs, `None` where not requested.
    pub heads: Vec<Option<Vec<T>>>,
    pub trace: Trace<T>,
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, t: &mut Tensor<T>, bound: f64) {
    for v in t.data_mut() {
        *v = T::lit(rng.gen_range(-bound..=bound));
    }
}

impl<T: Scalar> Model<T> {
    /// All-zero parameters except LayerNorm scales, which start at one.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let grids = config.grids.iter().map(|g| Tensor::zeros(&g.shape())).collect();
        let stages = (1..=config.num_stages)
            .map(|i| {
                let cin = config.stage_input_channels(i);
                let c = config.stage_channels(i);
                Stage {
                    upsample: HybridUpsample::zeros(
                        cin,
                        c,
                        config.upsample_factor,
                        config.upsample_dw_kernel,
                        config.upsample_mode,
                    ),
                    falayers: (0..config.falayers_per_stage)
                        .map(|_| Falayer::zeros(c, config.mlp_hidden(c), config.dw_kernel))
                        .collect(),
                    head: ProjectionHead::zeros(c, config.head_hidden, config.output_activation),
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            grids,
            stages,
        })
    }

    /// Seeded initialization: fan-in scaled uniform weights and biases,
    /// small uniform grids, unit LayerNorm scales.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        for g in &mut m.grids {
            uniform(&mut rng, g, GRID_INIT);
        }
        for s in &mut m.stages {
            let cin = s.upsample.in_channels;
            let k = s.upsample.kernel;
            if let Some(b) = s.upsample.learnable.as_mut() {
                uniform(&mut rng, &mut b.pw_weight, fan(cin));
                uniform(&mut rng, &mut b.pw_bias, fan(cin));
                uniform(&mut rng, &mut b.dw_weight, fan(k * k));
                uniform(&mut rng, &mut b.dw_bias, fan(k * k));
            }
            for f in &mut s.falayers {
                let (c, hid, k) = (f.channels, f.hidden, f.kernel);
                uniform(&mut rng, &mut f.dw_weight, fan(k * k));
                uniform(&mut rng, &mut f.dw_bias, fan(k * k));
                uniform(&mut rng, &mut f.fc1_weight, fan(c));
                uniform(&mut rng, &mut f.fc1_bias, fan(c));
                uniform(&mut rng, &mut f.fc2_weight, fan(hid));
                uniform(&mut rng, &mut f.fc2_bias, fan(hid));
            }
            let c = s.head.channels;
            let mut width = c;
            if let Some((w, b)) = s.head.hidden.as_mut() {
                width = w.shape()[0];
                uniform(&mut rng, w, fan(c));
                uniform(&mut rng, b, fan(c));
            }
            uniform(&mut rng, &mut s.head.weight, fan(width));
            uniform(&mut rng, &mut s.head.bias, fan(width));
        }
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Gradient buffer with the same layout; every entry is zero.
    pub fn zeros_like(&self) -> Self {
        let mut g = Self::zeros(&self.config).expect("config validated at construction");
        g.fill(T::zero());
        g
    }

    pub fn fill(&mut self, value: T) {
        for (_, t) in self.params_mut() {
            t.fill(value);
        }
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let mut out = Model::<U>::zeros(&self.config).expect("validated");
        for ((_, dst), (_, src)) in out.params_mut().into_iter().zip(self.params()) {
            *dst = src.cast();
        }
        out
    }

    /// Named parameters in canonical order.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (g, t) in self.grids.iter().enumerate() {
            out.push((format!("grid{g}"), t));
        }
        for (i, s) in self.stages.iter().enumerate() {
            let p = format!("stage{}", i + 1);
            if let Some(b) = &s.upsample.learnable {
                out.push((format!("{p}.up.pw.weight"), &b.pw_weight));
                out.push((format!("{p}.up.pw.bias"), &b.pw_bias));
                out.push((format!("{p}.up.dw.weight"), &b.dw_weight));
                out.push((format!("{p}.up.dw.bias"), &b.dw_bias));
            }
            for (j, f) in s.falayers.iter().enumerate() {
                let q = format!("{p}.falayer{j}");
                out.push((format!("{q}.dw.weight"), &f.dw_weight));
                out.push((format!("{q}.dw.bias"), &f.dw_bias));
                out.push((format!("{q}.ln.weight"), &f.ln_weight));
                out.push((format!("{q}.ln.bias"), &f.ln_bias));
                out.push((format!("{q}.fc1.weight"), &f.fc1_weight));
                out.push((format!("{q}.fc1.bias"), &f.fc1_bias));
                out.push((format!("{q}.fc2.weight"), &f.fc2_weight));
                out.push((format!("{q}.fc2.bias"), &f.fc2_bias));
            }
            if let Some((w, b)) = &s.head.hidden {
                out.push((format!("{p}.head.hidden.weight"), w));
                out.push((format!("{p}.head.hidden.bias"), b));
            }
            out.push((format!("{p}.head.weight"), &s.head.weight));
            out.push((format!("{p}.head.bias"), &s.head.bias));
        }
        out
    }

    /// Mutable counterpart of [`Model::params`], same order.
    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (g, t) in self.grids.iter_mut().enumerate() {
            out.push((format!("grid{g}"), t));
        }
        for (i, s) in self.stages.iter_mut().enumerate() {
            let p = format!("stage{}", i + 1);
            if let Some(b) = s.upsample.learnable.as_mut() {
                out.push((format!("{p}.up.pw.weight"), &mut b.pw_weight));
                out.push((format!("{p}.up.pw.bias"), &mut b.pw_bias));
                out.push((format!("{p}.up.dw.weight"), &mut b.dw_weight));
                out.push((format!("{p}.up.dw.bias"), &mut b.dw_bias));
            }
            for (j, f) in s.falayers.iter_mut().enumerate() {
                let q = format!("{p}.falayer{j}");
                out.push((format!("{q}.dw.weight"), &mut f.dw_weight));
                out.push((format!("{q}.dw.bias"), &mut f.dw_bias));
                out.push((format!("{q}.ln.weight"), &mut f.ln_weight));
                out.push((format!("{q}.ln.bias"), &mut f.ln_bias));
                out.push((format!("{q}.fc1.weight"), &mut f.fc1_weight));
                out.push((format!("{q}.fc1.bias"), &mut f.fc1_bias));
                out.push((format!("{q}.fc2.weight"), &mut f.fc2_weight));
                out.push((format!("{q}.fc2.bias"), &mut f.fc2_bias));
            }
            if let Some((w, b)) = s.head.hidden.as_mut() {
                out.push((format!("{p}.head.hidden.weight"), w));
                out.push((format!("{p}.head.hidden.bias"), b));
            }
            out.push((format!("{p}.head.weight"), &mut s.head.weight));
            out.push((format!("{p}.head.bias"), &mut s.head.bias));
        }
        out
    }

    /// Rebuild from named tensors; every expected name must be present with
    /// the expected shape, and no extra names are allowed.
    pub fn from_params(config: &ModelConfig, mut named: BTreeMap<String, Tensor<T>>) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        for (name, dst) in m.params_mut() {
            let src = named
                .remove(&name)
                .ok_or_else(|| Error::Config(format!("missing parameter tensor `{name}`")))?;
            if src.shape() != dst.shape() {
                return Err(Error::shape(dst.shape(), src.shape()));
            }
            *dst = src;
        }
        if let Some(extra) = named.keys().next() {
            return Err(Error::Config(format!("unexpected parameter tensor `{extra}`")));
        }
        Ok(m)
    }

    pub fn count_parameters(&self) -> ParamCount {
        let grids = self.grids.iter().map(Tensor::len).sum();
        let stages: Vec<usize> = (1..=self.stages.len())
            .map(|i| {
                let prefix = format!("stage{i}.");
                self.params()
                    .iter()
                    .filter(|(n, _)| n.starts_with(&prefix))
                    .map(|(_, t)| t.len())
                    .sum()
            })
            .collect();
        let total = grids + stages.iter().sum::<usize>();
        ParamCount {
            grids,
            stages,
            total,
        }
    }

    /// Sum of squares over all parameters; handy in tests and logs.
    pub fn squared_norm(&self) -> f64 {
        self.params()
            .iter()
            .flat_map(|(_, t)| t.data().iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum()
    }

    /// Runs stages `1..=upto`; heads are evaluated where `heads[i]` is set.
    pub fn run(&self, coord: &PatchCoordinate, upto: usize, heads: &[bool]) -> ForwardPass<T> {
        let cfg = &self.config;
        let upto = upto.min(self.stages.len());
        let plans = grid::plan_all(cfg, coord);
        let (mut h, mut w) = cfg.base_dims();
        let mut x = grid::lookup(&self.grids, cfg, &plans);
        let mut features = Vec::with_capacity(upto);
        let mut head_out = vec![None; self.stages.len()];
        let mut traces = Vec::with_capacity(upto);
        for (i, stage) in self.stages.iter().take(upto).enumerate() {
            let (up, up_cache) = stage.upsample.forward(&x, h, w);
            let (sh, sw) = (h, w);
            h *= cfg.upsample_factor;
            w *= cfg.upsample_factor;
            x = up;
            let mut fl_caches = Vec::with_capacity(stage.falayers.len());
            for f in &stage.falayers {
                let (y, c) = f.forward(&x, h, w);
                x = y;
                fl_caches.push(c);
            }
            let head_cache = if heads.get(i).copied().unwrap_or(false) {
                let (out, c) = stage.head.forward(&x, h * w);
                head_out[i] = Some(out);
                Some(c)
            } else {
                None
            };
            traces.push(StageTrace {
                h: sh,
                w: sw,
                upsample: up_cache,
                falayers: fl_caches,
                head: head_cache,
            });
            features.push(x.clone());
        }
        ForwardPass {
            features,
            heads: head_out,
            trace: Trace {
                plans,
                stages: traces,
            },
        }
    }

    /// All `S` predictions `[V̂_1 … V̂_S]`, planar `[3, h_r, w_r]`.
    pub fn forward(&self, coord: &PatchCoordinate) -> Result<Vec<Tensor<T>>> {
        PatchCoordinate::new(coord.x, coord.y, coord.t)?;
        let s = self.stages.len();
        let pass = self.run(coord, s, &vec![true; s]);
        pass.heads
            .into_iter()
            .enumerate()
            .map(|(i, o)| {
                let (h, w) = self.config.level_dims(i + 1);
                Tensor::from_vec(&[3, h, w], o.expect("all heads requested"))
            })
            .collect()
    }

    /// Prediction of head `level` only; later stages are never evaluated.
    pub fn forward_level(&self, coord: &PatchCoordinate, level: usize) -> Result<Tensor<T>> {
        self.check_level(level)?;
        PatchCoordinate::new(coord.x, coord.y, coord.t)?;
        let mut heads = vec![false; self.stages.len()];
        heads[level - 1] = true;
        let pass = self.run(coord, level, &heads);
        let (h, w) = self.config.level_dims(level);
        Tensor::from_vec(&[3, h, w], pass.heads[level - 1].clone().expect("requested"))
    }

    /// Stage output `X_level` computed by a pass truncated after `level`.
    pub fn stage_features(&self, coord: &PatchCoordinate, level: usize) -> Result<Tensor<T>> {
        self.check_level(level)?;
        let pass = self.run(coord, level, &[]);
        let (h, w) = self.config.level_dims(level);
        let c = self.config.stage_channels(level);
        Tensor::from_vec(&[c, h, w], pass.features[level - 1].clone())
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.stages.len() {
            return Err(Error::InvalidArgument(format!(
                "resolution level {level} outside 1..={}",
                self.stages.len()
            )));
        }
        Ok(())
    }

    /// Accumulate parameter gradients into `grads` given gradients of the
    /// loss with respect to each evaluated head output.
    pub fn backward(&self, trace: &Trace<T>, head_grads: &[Option<Vec<T>>], grads: &mut Model<T>) {
        let cfg = &self.config;
        let mut d_x: Option<Vec<T>> = None;
        for i in (0..trace.stages.len()).rev() {
            let st = &trace.stages[i];
            let stage = &self.stages[i];
            let gstage = &mut grads.stages[i];
            let (h, w) = (st.h * cfg.upsample_factor, st.w * cfg.upsample_factor);
            let c = stage.upsample.out_channels;
            let mut d = d_x.take().unwrap_or_else(|| vec![T::zero(); c * h * w]);
            if let (Some(hc), Some(Some(g))) = (&st.head, head_grads.get(i)) {
                let dh = stage.head.backward(hc, g, &mut gstage.head);
                d.iter_mut().zip(&dh).for_each(|(a, &b)| *a += b);
            }
            for (j, fc) in st.falayers.iter().enumerate().rev() {
                d = stage.falayers[j].backward(fc, &d, &mut gstage.falayers[j]);
            }
            d_x = Some(stage.upsample.backward(&st.upsample, &d, &mut gstage.upsample));
        }
        if let Some(d) = d_x {
            grid::lookup_backward(cfg, &trace.plans, &d, &mut grads.grids);
        }
    }
}
