use serde::{Deserialize, Serialize};

use super::filter::{high_pass, high_pass_adjoint, planes_of};
use super::ssim::ms_ssim_with_grad;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn check_same<T>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(b.shape(), a.shape()));
    }
    Ok(())
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    check_same(a, b)?;
    Tensor::from_vec(a.shape(), a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect())
}

/// `ℋ(V − V̂)`: the high-frequency part of the reconstruction error.
pub fn hf_residual<T: Scalar>(v: &Tensor<T>, v_hat: &Tensor<T>, sigma: f64) -> Result<Tensor<T>> {
    high_pass(&zip_map(v, v_hat, |a, b| a - b)?, sigma)
}

/// `V + β·R`, optionally clamped to `[0, 1]`.
pub fn enhanced_target<T: Scalar>(
    v: &Tensor<T>,
    residual: &Tensor<T>,
    inject_beta: f64,
    clamp_target: bool,
) -> Result<Tensor<T>> {
    if !(inject_beta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "injection intensity must be non-negative, got {inject_beta}"
        )));
    }
    let beta = T::lit(inject_beta);
    zip_map(v, residual, |a, r| {
        let t = a + beta * r;
        if clamp_target {
            t.max(T::zero()).min(T::one())
        } else {
            t
        }
    })
}

pub fn mse_loss<T: Scalar>(v_hat: &Tensor<T>, v: &Tensor<T>) -> Result<T> {
    check_same(v_hat, v)?;
    let s = v_hat.data().iter().zip(v.data()).fold(T::zero(), |acc, (&a, &b)| {
        let d = a - b;
        acc + d * d
    });
    Ok(s / T::lit(v.len() as f64))
}

pub fn l1_loss<T: Scalar>(v_hat: &Tensor<T>, v: &Tensor<T>) -> Result<T> {
    check_same(v_hat, v)?;
    let s = v_hat
        .data()
        .iter()
        .zip(v.data())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs());
    Ok(s / T::lit(v.len() as f64))
}

/// Gradient of [`mse_loss`] with respect to `v_hat`.
pub fn mse_grad<T: Scalar>(v_hat: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let k = T::lit(2.0 / v.len() as f64);
    zip_map(v_hat, v, |a, b| k * (a - b))
}

/// Gradient of [`l1_loss`] with respect to `v_hat` (zero where equal).
pub fn l1_grad<T: Scalar>(v_hat: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let k = T::lit(1.0 / v.len() as f64);
    zip_map(v_hat, v, |a, b| {
        let d = a - b;
        if d > T::zero() {
            k
        } else if d < T::zero() {
            -k
        } else {
            T::zero()
        }
    })
}

/// Mean per-frame PSNR in dB. A rank-4 tensor is read as `[frames, …]`,
/// anything else as one frame. Returns `+∞` for a frame with zero error.
pub fn psnr<T: Scalar>(v_hat: &Tensor<T>, v: &Tensor<T>, peak: f64) -> Result<f64> {
    check_same(v_hat, v)?;
    let frames = if v.shape().len() == 4 { v.shape()[0] } else { 1 };
    let per = v.len() / frames.max(1);
    let mut total = 0.0;
    for f in 0..frames {
        let r = f * per..(f + 1) * per;
        let mse = v_hat.data()[r.clone()]
            .iter()
            .zip(&v.data()[r])
            .map(|(&a, &b)| {
                let d = a.as_f64() - b.as_f64();
                d * d
            })
            .sum::<f64>()
            / per as f64;
        total += psnr_from_mse(mse, peak);
    }
    Ok(total / frames as f64)
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Per-resolution loss coefficients and the high-frequency injection
/// settings. Index `r - 1` holds the coefficients of level `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: Vec<f64>,
    pub beta_l1: Vec<f64>,
    pub inject_beta: f64,
    pub hf_sigma: f64,
    pub clamp_target: bool,
}

impl LossWeights {
    /// MSE weight falls linearly from 0.9 at the coarsest level to 0.3 at
    /// full resolution; L1 takes the remainder below full resolution and
    /// 0.4 at full resolution, leaving 0.3 for MS-SSIM.
    pub fn default_for(levels: usize) -> Self {
        let alpha: Vec<f64> = (0..levels)
            .map(|i| {
                if levels == 1 {
                    0.3
                } else {
                    0.9 - 0.6 * i as f64 / (levels - 1) as f64
                }
            })
            .collect();
        let beta_l1 = alpha
            .iter()
            .enumerate()
            .map(|(i, a)| if i + 1 == levels { 0.4 } else { 1.0 - a })
            .collect();
        Self {
            alpha,
            beta_l1,
            inject_beta: 0.5,
            hf_sigma: 1.0,
            clamp_target: false,
        }
    }

    pub fn levels(&self) -> usize {
        self.alpha.len()
    }

    pub fn ms_ssim_weight(&self, r: usize) -> f64 {
        if r == self.levels() {
            1.0 - self.alpha[r - 1] - self.beta_l1[r - 1]
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.alpha.len();
        let bad = |m: String| Err(Error::Config(format!("loss weights: {m}")));
        if s == 0 || self.beta_l1.len() != s {
            return bad(format!(
                "alpha and beta_l1 need the same non-zero length, got {} and {}",
                s,
                self.beta_l1.len()
            ));
        }
        for r in 0..s - 1 {
            if (self.alpha[r] + self.beta_l1[r] - 1.0).abs() > 1e-9 {
                return bad(format!("alpha + beta_l1 must be 1 at level {}", r + 1));
            }
        }
        let last = self.alpha[s - 1] + self.beta_l1[s - 1];
        if !(-1e-12..=1.0 + 1e-12).contains(&last) || self.alpha[s - 1] < 0.0 || self.beta_l1[s - 1] < 0.0 {
            return bad(format!("full-resolution weights out of range (sum {last})"));
        }
        if self.alpha.windows(2).any(|w| w[1] > w[0]) {
            return bad("alpha must be non-increasing in resolution".into());
        }
        if s > 1 && self.beta_l1[..s - 1].windows(2).any(|w| w[1] < w[0]) {
            return bad("beta_l1 must be non-decreasing below full resolution".into());
        }
        if !(self.inject_beta >= 0.0) {
            return bad("inject_beta must be non-negative".into());
        }
        if !(self.hf_sigma > 0.0) {
            return bad("hf_sigma must be positive".into());
        }
        Ok(())
    }

    fn check_level(&self, r: usize) -> Result<()> {
        if r == 0 || r > self.levels() {
            return Err(Error::InvalidArgument(format!(
                "level {r} outside 1..={}",
                self.levels()
            )));
        }
        Ok(())
    }
}

/// How the full-resolution loss treats the prediction inside its own
/// enhanced target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetGradient {
    /// The enhanced target is a constant label for the step.
    #[default]
    Stop,
    /// Differentiate through `V_target = V + β·ℋ(V − V̂)` as well.
    Coupled,
}

/// Value of one scale-adaptive loss with gradients with respect to the
/// prediction and the target.
pub struct SaTerms<T> {
    pub value: T,
    pub d_pred: Tensor<T>,
    pub d_target: Tensor<T>,
}

fn mixture<T: Scalar>(
    v_hat: &Tensor<T>,
    v: &Tensor<T>,
    r: usize,
    w: &LossWeights,
    grad: bool,
    need_target: bool,
) -> Result<(T, Option<SaTerms<T>>)> {
    w.check_level(r)?;
    check_same(v_hat, v)?;
    let a = T::lit(w.alpha[r - 1]);
    let b = T::lit(w.beta_l1[r - 1]);
    let g = w.ms_ssim_weight(r);
    let mut value = a * mse_loss(v_hat, v)? + b * l1_loss(v_hat, v)?;
    let mut ssim = None;
    if g != 0.0 {
        let g = T::lit(g);
        let (m, dm) = if grad {
            let (m, dm) = ms_ssim_with_grad(v_hat, v)?;
            let dt = if need_target {
                ms_ssim_with_grad(v, v_hat)?.1
            } else {
                Tensor::zeros(v.shape())
            };
            (m, Some((dm, dt)))
        } else {
            (super::ssim::ms_ssim(v_hat, v)?, None)
        };
        value += g * (T::one() - m);
        ssim = dm.map(|d| (g, d));
    }
    if !grad {
        return Ok((value, None));
    }
    let mut d_pred = mse_grad(v_hat, v)?;
    let l1 = l1_grad(v_hat, v)?;
    for (d, &l) in d_pred.data_mut().iter_mut().zip(l1.data()) {
        *d = a * *d + b * l;
    }
    let mut d_target = d_pred.clone();
    d_target.data_mut().iter_mut().for_each(|d| *d = -*d);
    if let Some((g, (dm, dt))) = ssim {
        d_pred.add_scaled(&dm, -g);
        d_target.add_scaled(&dt, -g);
    }
    Ok((value, Some(SaTerms { value, d_pred, d_target })))
}

/// `α_r·MSE + β_r·L1 + (1 − α_r − β_r)·(1 − MS-SSIM)`; the MS-SSIM term is
/// only evaluated at full resolution.
pub fn sa_loss<T: Scalar>(v_hat: &Tensor<T>, v: &Tensor<T>, r: usize, weights: &LossWeights) -> Result<T> {
    Ok(mixture(v_hat, v, r, weights, false, false)?.0)
}

pub fn sa_loss_with_grad<T: Scalar>(
    v_hat: &Tensor<T>,
    v: &Tensor<T>,
    r: usize,
    weights: &LossWeights,
) -> Result<SaTerms<T>> {
    Ok(mixture(v_hat, v, r, weights, true, true)?.1.expect("gradient requested"))
}

#[derive(Clone, Debug)]
pub struct TotalLoss<T> {
    pub total: T,
    /// Loss of each level; zero for unsupervised levels.
    pub per_scale: Vec<T>,
    /// Gradient with respect to each supervised prediction.
    pub grads: Vec<Option<Tensor<T>>>,
}

/// Multi-resolution loss. `preds[r-1]` is the level-`r` prediction or
/// `None` when that level is not supervised; the last level is required.
/// `targets[r-1]` is the matching pyramid level.
pub fn total_loss_with_grad<T: Scalar>(
    preds: &[Option<&Tensor<T>>],
    targets: &[&Tensor<T>],
    weights: &LossWeights,
    mode: TargetGradient,
) -> Result<TotalLoss<T>> {
    run_total(preds, targets, weights, Some(mode))
}

/// Value-only counterpart of [`total_loss_with_grad`] with every level
/// supervised.
pub fn total_loss<T: Scalar>(preds: &[Tensor<T>], targets: &[&Tensor<T>], weights: &LossWeights) -> Result<TotalLoss<T>> {
    let p: Vec<Option<&Tensor<T>>> = preds.iter().map(Some).collect();
    run_total(&p, targets, weights, None)
}

fn run_total<T: Scalar>(
    preds: &[Option<&Tensor<T>>],
    targets: &[&Tensor<T>],
    weights: &LossWeights,
    mode: Option<TargetGradient>,
) -> Result<TotalLoss<T>> {
    weights.validate()?;
    let s = weights.levels();
    if preds.len() != s || targets.len() != s {
        return Err(Error::InvalidArgument(format!(
            "expected {s} predictions and targets, got {} and {}",
            preds.len(),
            targets.len()
        )));
    }
    let mut per_scale = vec![T::zero(); s];
    let mut grads = vec![None; s];
    for r in 1..s {
        if let Some(p) = preds[r - 1] {
            let (value, terms) = mixture(p, targets[r - 1], r, weights, mode.is_some(), false)?;
            per_scale[r - 1] = value;
            grads[r - 1] = terms.map(|t| t.d_pred);
        }
    }
    let p = preds[s - 1].ok_or_else(|| Error::InvalidArgument("full-resolution prediction is required".into()))?;
    let v = targets[s - 1];
    check_same(p, v)?;
    planes_of(p.shape())?;
    let residual = hf_residual(v, p, weights.hf_sigma)?;
    let target = enhanced_target(v, &residual, weights.inject_beta, weights.clamp_target)?;
    let (value, terms) = mixture(p, &target, s, weights, mode.is_some(), mode == Some(TargetGradient::Coupled))?;
    per_scale[s - 1] = value;
    if let Some(terms) = terms {
        let mut d = terms.d_pred;
        if mode == Some(TargetGradient::Coupled) && weights.inject_beta != 0.0 {
            // dV_target/dV̂ = −β·ℋ, masked where the clamp is active.
            let beta = T::lit(weights.inject_beta);
            let mut dt = terms.d_target;
            if weights.clamp_target {
                let raw = enhanced_target(v, &residual, weights.inject_beta, false)?;
                for (g, &t) in dt.data_mut().iter_mut().zip(raw.data()) {
                    if t < T::zero() || t > T::one() {
                        *g = T::zero();
                    }
                }
            }
            let back = high_pass_adjoint(&dt, weights.hf_sigma)?;
            d.add_scaled(&back, -beta);
        }
        grads[s - 1] = Some(d);
    }
    let total = per_scale.iter().fold(T::zero(), |a, &b| a + b);
    Ok(TotalLoss { total, per_scale, grads })
}
