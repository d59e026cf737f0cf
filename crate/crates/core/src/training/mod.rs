//! Patch-wise fitting of a model to one video: batching, optimizer,
//! learning-rate schedule, resumable state, ablation toggles and
//! quantization-aware fine-tuning.

mod data;
mod optim;
mod state;

pub use data::{epoch_order, make_batches, model_geometry, Batch, BatchItem, TrainingSet};
pub use optim::{learning_rate, Adam, Schedule};
pub use state::{BestCheckpoint, TrainState};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{check_bits, fake_quantize, max_symbol, tensor_scale};
use crate::error::{Error, Result};
use crate::model::{ForwardPass, Model, ModelConfig, UpsampleMode};
use crate::objectives::{psnr_from_mse, total_loss_with_grad, video_ms_ssim, video_psnr, LossWeights, TargetGradient};
use crate::render::reconstruct;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Patches per optimizer step.
    pub batch_patches: usize,
    pub lr: f64,
    pub schedule: Schedule,
    pub warmup_epochs: usize,
    pub min_lr_ratio: f64,
    pub seed: u64,
    /// Full-video evaluation period in epochs; the last epoch is always
    /// evaluated.
    pub eval_every: usize,
    pub disable_mrs: bool,
    pub disable_dhfi: bool,
    pub upsample_mode: UpsampleMode,
    pub target_gradient: TargetGradient,
    pub qat_epochs: usize,
    pub qat_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_patches: 8,
            lr: 1e-3,
            schedule: Schedule::CosineWithWarmup,
            warmup_epochs: 3,
            min_lr_ratio: 0.01,
            seed: 0,
            eval_every: 10,
            disable_mrs: false,
            disable_dhfi: false,
            upsample_mode: UpsampleMode::Hybrid,
            target_gradient: TargetGradient::Stop,
            qat_epochs: 30,
            qat_lr: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if self.batch_patches == 0 {
            return bad("batch_patches must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.qat_lr > 0.0 && self.qat_lr.is_finite()) {
            return bad("learning rates must be positive and finite");
        }
        if !(0.0..=1.0).contains(&self.min_lr_ratio) {
            return bad("min_lr_ratio must lie in [0, 1]");
        }
        Ok(())
    }

    /// Model configuration with this run's upsampling mode.
    pub fn apply_model(&self, model: &ModelConfig) -> ModelConfig {
        let mut m = model.clone();
        m.upsample_mode = self.upsample_mode;
        m
    }

    /// Loss weights with high-frequency injection removed when disabled.
    pub fn apply_weights(&self, weights: &LossWeights) -> LossWeights {
        let mut w = weights.clone();
        if self.disable_dhfi {
            w.inject_beta = 0.0;
        }
        w
    }

    /// Which heads receive a loss.
    pub fn supervised_levels(&self, levels: usize) -> Vec<bool> {
        (1..=levels).map(|r| !self.disable_mrs || r == levels).collect()
    }

    /// One-line summary of the active components, logged with every run.
    pub fn fingerprint(&self) -> String {
        let on = |b: bool| if b { "on" } else { "off" };
        let mode = match self.upsample_mode {
            UpsampleMode::Hybrid => "hybrid",
            UpsampleMode::LearnableOnly => "learnable_only",
            UpsampleMode::BilinearOnly => "bilinear_only",
        };
        let grad = match self.target_gradient {
            TargetGradient::Stop => "stop",
            TargetGradient::Coupled => "coupled",
        };
        format!(
            "mrs={} dhfi={} upsample={mode} target_grad={grad}",
            on(!self.disable_mrs),
            on(!self.disable_dhfi)
        )
    }
}

/// Named component removals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    /// Supervise the full-resolution head only.
    V1,
    /// No high-frequency injection.
    V2,
    /// Learnable upsampling branch only.
    V3,
    /// Bilinear upsampling branch only.
    V4,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [Ablation::Full, Ablation::V1, Ablation::V2, Ablation::V3, Ablation::V4];

    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let mut c = cfg.clone();
        c.disable_mrs = false;
        c.disable_dhfi = false;
        c.upsample_mode = UpsampleMode::Hybrid;
        match self {
            Ablation::Full => {}
            Ablation::V1 => c.disable_mrs = true,
            Ablation::V2 => c.disable_dhfi = true,
            Ablation::V3 => c.upsample_mode = UpsampleMode::LearnableOnly,
            Ablation::V4 => c.upsample_mode = UpsampleMode::BilinearOnly,
        }
        c
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Ablation::Full => "full",
            Ablation::V1 => "v1",
            Ablation::V2 => "v2",
            Ablation::V3 => "v3",
            Ablation::V4 => "v4",
        };
        f.write_str(s)
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "none" => Ok(Ablation::Full),
            "v1" => Ok(Ablation::V1),
            "v2" => Ok(Ablation::V2),
            "v3" => Ok(Ablation::V3),
            "v4" => Ok(Ablation::V4),
            other => Err(Error::InvalidArgument(format!(
                "unknown ablation `{other}` (expected full, v1, v2, v3 or v4)"
            ))),
        }
    }
}

/// Per-epoch record. `PSNR` is measured on the training passes of the
/// epoch; `eval_psnr` and `MS-SSIM` come from a full render on
/// evaluation epochs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    #[serde(rename = "L_total")]
    pub loss_total: f64,
    #[serde(rename = "L_SA")]
    pub loss_per_scale: Vec<f64>,
    #[serde(rename = "PSNR")]
    pub psnr: f64,
    #[serde(rename = "MS-SSIM")]
    pub ms_ssim: Option<f64>,
    pub eval_psnr: Option<f64>,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub psnr: f64,
    pub ms_ssim: Option<f64>,
}

/// Render the full-resolution video and score it against the original.
pub fn evaluate(model: &Model<f32>, set: &TrainingSet) -> Result<Evaluation> {
    let d = set.dims();
    let s = model.config().num_stages;
    let recon = reconstruct(model, d.frames, d.height, d.width, &set.spec, s)?;
    Ok(Evaluation {
        psnr: video_psnr(&recon, &set.original)?,
        ms_ssim: video_ms_ssim(&recon, &set.original).ok(),
    })
}

pub struct TrainOutcome {
    pub state: TrainState,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    /// Best evaluated model, or the final one when nothing was evaluated.
    pub fn best_model(&self) -> &Model<f32> {
        self.state.best.as_ref().map(|b| &b.model).unwrap_or(&self.state.model)
    }
}

struct StepResult {
    grads: Model<f32>,
    loss: f64,
    per_scale: Vec<f64>,
    frame_sse: Vec<(usize, f64, usize)>,
}

/// Loss and batch-mean gradients of `model` over one batch. Items are
/// processed in parallel and summed in batch order.
fn batch_gradients(
    model: &Model<f32>,
    batch: &Batch,
    weights: &LossWeights,
    supervise: &[bool],
    mode: TargetGradient,
) -> Result<StepResult> {
    let cfg = model.config();
    let s = cfg.num_stages;
    let scale = 1.0 / batch.items.len() as f32;
    let parts = batch
        .items
        .par_iter()
        .map(|item| {
            let ForwardPass { heads, trace, .. } = model.run(&item.coord, s, supervise);
            let preds = heads
                .into_iter()
                .enumerate()
                .map(|(i, h)| {
                    h.map(|d| {
                        let (hh, ww) = cfg.level_dims(i + 1);
                        Tensor::from_vec(&[3, hh, ww], d)
                    })
                    .transpose()
                })
                .collect::<Result<Vec<_>>>()?;
            let pred_refs: Vec<Option<&Tensor<f32>>> = preds.iter().map(Option::as_ref).collect();
            let targets: Vec<&Tensor<f32>> = item.targets.iter().collect();
            let loss = total_loss_with_grad(&pred_refs, &targets, weights, mode)?;
            let full = preds[s - 1].as_ref().expect("full resolution is always supervised");
            let sse: f64 = full
                .data()
                .iter()
                .zip(item.targets[s - 1].data())
                .map(|(&a, &b)| {
                    let d = a.clamp(0.0, 1.0) as f64 - b as f64;
                    d * d
                })
                .sum();
            let head_grads: Vec<Option<Vec<f32>>> = loss
                .grads
                .into_iter()
                .map(|g| g.map(|g| g.into_data().into_iter().map(|v| v * scale).collect()))
                .collect();
            let mut grads = model.zeros_like();
            model.backward(&trace, &head_grads, &mut grads);
            Ok((
                grads,
                loss.total as f64,
                loss.per_scale.iter().map(|&v| v as f64).collect::<Vec<_>>(),
                (item.window.frame, sse, full.len()),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut grads, mut loss, mut per_scale, first) = iter.next().expect("non-empty batch");
    let mut frame_sse = vec![first];
    for (g, l, ps, f) in iter {
        add_into(&mut grads, &g);
        loss += l;
        per_scale.iter_mut().zip(ps).for_each(|(a, b)| *a += b);
        frame_sse.push(f);
    }
    Ok(StepResult {
        grads,
        loss,
        per_scale,
        frame_sse,
    })
}

fn add_into(acc: &mut Model<f32>, other: &Model<f32>) {
    for ((_, a), (_, b)) in acc.params_mut().into_iter().zip(other.params()) {
        a.data_mut().iter_mut().zip(b.data()).for_each(|(x, &y)| *x += y);
    }
}

/// Copy of `model` with every tensor replaced by its quantize-dequantize
/// image at `bits`.
pub fn fake_quantize_model(model: &Model<f32>, bits: u32) -> Result<Model<f32>> {
    let bits = check_bits(bits)?;
    let mut out = model.clone();
    for (_, t) in out.params_mut() {
        let q = fake_quantize(t.data(), bits);
        t.data_mut().copy_from_slice(&q);
    }
    Ok(out)
}

/// Straight-through gradient of quantize-dequantize: `grads` pass
/// unchanged where `|w|` lies inside the quantizer's range
/// `(qmax + 1/2)·scale` and are zeroed outside it.
pub fn straight_through(values: &[f32], grads: &mut [f32], scale: f32, bits: u8) {
    let limit = (max_symbol(bits) as f64 + 0.5) * scale as f64;
    for (g, &w) in grads.iter_mut().zip(values) {
        if (w as f64).abs() > limit {
            *g = 0.0;
        }
    }
}

struct EpochTotals {
    loss: f64,
    per_scale: Vec<f64>,
    items: usize,
    sse: Vec<f64>,
    count: Vec<usize>,
}

impl EpochTotals {
    fn new(levels: usize, frames: usize) -> Self {
        Self {
            loss: 0.0,
            per_scale: vec![0.0; levels],
            items: 0,
            sse: vec![0.0; frames],
            count: vec![0; frames],
        }
    }

    fn add(&mut self, step: &StepResult) {
        self.frame_and_loss(step.loss, &step.per_scale, &step.frame_sse);
    }

    fn frame_and_loss(&mut self, loss: f64, per_scale: &[f64], frame_sse: &[(usize, f64, usize)]) {
        self.loss += loss;
        self.per_scale.iter_mut().zip(per_scale).for_each(|(a, b)| *a += b);
        self.items += frame_sse.len();
        for &(f, sse, n) in frame_sse {
            self.sse[f] += sse;
            self.count[f] += n;
        }
    }

    fn log(&self, epoch: usize, lr: f64, eval: Option<Evaluation>) -> EpochLog {
        let n = self.items.max(1) as f64;
        let frames: Vec<f64> = self
            .sse
            .iter()
            .zip(&self.count)
            .filter(|(_, &c)| c > 0)
            .map(|(&s, &c)| psnr_from_mse(s / c as f64, 1.0))
            .collect();
        EpochLog {
            epoch,
            loss_total: self.loss / n,
            loss_per_scale: self.per_scale.iter().map(|v| v / n).collect(),
            psnr: frames.iter().sum::<f64>() / frames.len().max(1) as f64,
            ms_ssim: eval.and_then(|e| e.ms_ssim),
            eval_psnr: eval.map(|e| e.psnr),
            lr,
        }
    }
}

fn is_eval_epoch(epoch: usize, total: usize, every: usize) -> bool {
    epoch == total || epoch % every == 0
}

/// Fresh state for a run: the model is initialised from `cfg.seed`.
pub fn initial_state(model: &ModelConfig, cfg: &TrainConfig) -> Result<TrainState> {
    cfg.validate()?;
    let model = Model::init(&cfg.apply_model(model), cfg.seed)?;
    Ok(TrainState::new(model, cfg.seed))
}

/// Run epochs `state.epochs_done + 1 ..= cfg.epochs`. Resuming from a saved
/// state reproduces the uninterrupted run exactly.
pub fn train(
    state: TrainState,
    set: &TrainingSet,
    weights: &LossWeights,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    train_epochs(state, set, weights, cfg, usize::MAX, on_epoch)
}

/// Like [`train`] but stops after at most `max_epochs` epochs, leaving a
/// state that can be saved and resumed.
pub fn train_epochs(
    mut state: TrainState,
    set: &TrainingSet,
    weights: &LossWeights,
    cfg: &TrainConfig,
    max_epochs: usize,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mcfg = state.model.config().clone();
    if mcfg.upsample_mode != cfg.upsample_mode {
        return Err(Error::Config(format!(
            "state was built with upsample mode {:?}, run asks for {:?}",
            mcfg.upsample_mode, cfg.upsample_mode
        )));
    }
    if state.seed != cfg.seed {
        return Err(Error::Config(format!(
            "state seed {} differs from the configured seed {}",
            state.seed, cfg.seed
        )));
    }
    let weights = cfg.apply_weights(weights);
    weights.validate()?;
    let s = mcfg.num_stages;
    if weights.levels() != s {
        return Err(Error::Config(format!(
            "loss weights cover {} levels, model has {s}",
            weights.levels()
        )));
    }
    let supervise = cfg.supervised_levels(s);
    let steps_per_epoch = set.patches.len().div_ceil(cfg.batch_patches);
    let total_steps = steps_per_epoch * cfg.epochs;
    let warmup = steps_per_epoch * cfg.warmup_epochs;
    let mut log = Vec::new();
    let end = cfg.epochs.min(state.epochs_done.saturating_add(max_epochs));
    for epoch in state.epochs_done..end {
        let batches = make_batches(&set.pyramid, &set.spec, state.seed, epoch, cfg.batch_patches)?;
        let mut totals = EpochTotals::new(s, set.original.frames());
        let mut lr = cfg.lr;
        for (i, batch) in batches.iter().enumerate() {
            let step = epoch * steps_per_epoch + i;
            lr = learning_rate(cfg.lr, cfg.min_lr_ratio, warmup, total_steps, step);
            let res = batch_gradients(&state.model, batch, &weights, &supervise, cfg.target_gradient)?;
            if !res.loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, step: i });
            }
            state.adam.update(&mut state.model, &res.grads, lr);
            totals.add(&res);
        }
        state.epochs_done = epoch + 1;
        let eval = if is_eval_epoch(epoch + 1, cfg.epochs, cfg.eval_every) {
            let e = evaluate(&state.model, set)?;
            state.offer_best(epoch + 1, e.psnr);
            Some(e)
        } else {
            None
        };
        let entry = totals.log(epoch + 1, lr, eval);
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome { state, log })
}

pub struct QatOutcome {
    /// Full-precision weights whose quantized image scored best.
    pub model: Model<f32>,
    /// PSNR of the quantized starting point.
    pub ptq_psnr: f64,
    /// PSNR of the quantized returned model.
    pub qat_psnr: f64,
    pub log: Vec<EpochLog>,
}

/// Fine-tune `start` for `cfg.qat_epochs` epochs with quantize-dequantize
/// in the forward pass and straight-through gradients. The returned
/// model is never worse after quantization than `start`.
pub fn qat_finetune(
    start: &Model<f32>,
    set: &TrainingSet,
    weights: &LossWeights,
    cfg: &TrainConfig,
    bits: u32,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<QatOutcome> {
    cfg.validate()?;
    let qbits = check_bits(bits)?;
    let weights = cfg.apply_weights(weights);
    let s = start.config().num_stages;
    let supervise = cfg.supervised_levels(s);
    let ptq_psnr = evaluate(&fake_quantize_model(start, bits)?, set)?.psnr;
    let mut best = (ptq_psnr, start.clone());
    let mut master = start.clone();
    let mut adam = Adam::new(&master);
    let steps_per_epoch = set.patches.len().div_ceil(cfg.batch_patches);
    let total_steps = steps_per_epoch * cfg.qat_epochs;
    let mut log = Vec::new();
    for epoch in 0..cfg.qat_epochs {
        let stream = cfg.epochs + epoch;
        let batches = make_batches(&set.pyramid, &set.spec, cfg.seed, stream, cfg.batch_patches)?;
        let mut totals = EpochTotals::new(s, set.original.frames());
        let mut lr = cfg.qat_lr;
        for (i, batch) in batches.iter().enumerate() {
            lr = learning_rate(cfg.qat_lr, cfg.min_lr_ratio, 0, total_steps, epoch * steps_per_epoch + i);
            let quantized = fake_quantize_model(&master, bits)?;
            let res = batch_gradients(&quantized, batch, &weights, &supervise, cfg.target_gradient)?;
            if !res.loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, step: i });
            }
            let mut grads = res.grads;
            for ((_, g), (_, w)) in grads.params_mut().into_iter().zip(master.params()) {
                let scale = tensor_scale(w.data(), qbits);
                straight_through(w.data(), g.data_mut(), scale, qbits);
            }
            adam.update(&mut master, &grads, lr);
            totals.frame_and_loss(res.loss, &res.per_scale, &res.frame_sse);
        }
        let eval = if is_eval_epoch(epoch + 1, cfg.qat_epochs, cfg.eval_every) {
            let e = evaluate(&fake_quantize_model(&master, bits)?, set)?;
            if e.psnr > best.0 {
                best = (e.psnr, master.clone());
            }
            Some(e)
        } else {
            None
        };
        let entry = totals.log(epoch + 1, lr, eval);
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(QatOutcome {
        model: best.1,
        ptq_psnr,
        qat_psnr: best.0,
        log,
    })
}
