//! Coordinate lookup into the multi-resolution feature grids.

use crate::error::{Error, Result};
use crate::nn::{bilinear_resize, bilinear_resize_adjoint, LinearTaps};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::video_io::PatchCoordinate;

use super::config::{GridSpec, ModelConfig};

/// Interpolation plan for one grid at one patch coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSample {
    pub t_lo: usize,
    pub t_hi: usize,
    pub t_frac: f64,
    pub rows: LinearTaps,
    pub cols: LinearTaps,
}

fn snap(p: f64) -> f64 {
    let r = p.round();
    if (p - r).abs() < 1e-9 {
        r
    } else {
        p
    }
}

impl GridSample {
    /// Temporal position `t·(T_g − 1)` with clamped ends; spatially, the
    /// patch footprint is sampled at `h_0 × w_0` half-pixel centres.
    pub fn plan(spec: &GridSpec, coord: &PatchCoordinate, cfg: &ModelConfig) -> Self {
        let u = snap(coord.t.clamp(0.0, 1.0) * (spec.frames - 1) as f64);
        let t_lo = u.floor() as usize;
        let t_hi = (t_lo + 1).min(spec.frames - 1);
        let t_frac = if t_hi == t_lo { 0.0 } else { u - t_lo as f64 };
        let (h0, w0) = cfg.base_dims();
        let extent_y = cfg.patch_height as f64 / cfg.frame_height as f64;
        let extent_x = cfg.patch_width as f64 / cfg.frame_width as f64;
        let axis = |centre: f64, extent: f64, n_out: usize, n_grid: usize| {
            LinearTaps::from_positions(
                (0..n_out).map(|i| {
                    let v = centre + ((i as f64 + 0.5) / n_out as f64 - 0.5) * extent;
                    snap(v * n_grid as f64 - 0.5)
                }),
                n_grid,
            )
        };
        Self {
            t_lo,
            t_hi,
            t_frac,
            rows: axis(coord.y, extent_y, h0, spec.height),
            cols: axis(coord.x, extent_x, w0, spec.width),
        }
    }
}

pub(crate) fn plan_all(cfg: &ModelConfig, coord: &PatchCoordinate) -> Vec<GridSample> {
    cfg.grids.iter().map(|g| GridSample::plan(g, coord, cfg)).collect()
}

fn blend_slices<T: Scalar>(grid: &Tensor<T>, spec: &GridSpec, s: &GridSample) -> Vec<T> {
    let n = spec.channels * spec.height * spec.width;
    let lo = &grid.data()[s.t_lo * n..(s.t_lo + 1) * n];
    if s.t_frac == 0.0 {
        return lo.to_vec();
    }
    let hi = &grid.data()[s.t_hi * n..(s.t_hi + 1) * n];
    let b = T::lit(s.t_frac);
    let a = T::lit(1.0 - s.t_frac);
    lo.iter().zip(hi).map(|(&l, &h)| a * l + b * h).collect()
}

/// Embedding `[ΣC_g, h_0, w_0]`, grids concatenated along channels.
pub(crate) fn lookup<T: Scalar>(
    grids: &[Tensor<T>],
    cfg: &ModelConfig,
    plans: &[GridSample],
) -> Vec<T> {
    let mut out = Vec::with_capacity(cfg.embedding_channels() * cfg.base_dims().0 * cfg.base_dims().1);
    for ((grid, spec), plan) in grids.iter().zip(&cfg.grids).zip(plans) {
        let blended = blend_slices(grid, spec, plan);
        out.extend(bilinear_resize(
            &blended,
            spec.channels,
            spec.height,
            spec.width,
            &plan.rows,
            &plan.cols,
        ));
    }
    out
}

pub(crate) fn lookup_backward<T: Scalar>(
    cfg: &ModelConfig,
    plans: &[GridSample],
    d_embedding: &[T],
    grads: &mut [Tensor<T>],
) {
    let (h0, w0) = cfg.base_dims();
    let mut offset = 0;
    for ((grad, spec), plan) in grads.iter_mut().zip(&cfg.grids).zip(plans) {
        let len = spec.channels * h0 * w0;
        let d_blend = bilinear_resize_adjoint(
            &d_embedding[offset..offset + len],
            spec.channels,
            spec.height,
            spec.width,
            &plan.rows,
            &plan.cols,
        );
        offset += len;
        let n = spec.channels * spec.height * spec.width;
        let a = T::lit(1.0 - plan.t_frac);
        for (g, &d) in grad.data_mut()[plan.t_lo * n..(plan.t_lo + 1) * n]
            .iter_mut()
            .zip(&d_blend)
        {
            *g += a * d;
        }
        if plan.t_frac != 0.0 {
            let b = T::lit(plan.t_frac);
            for (g, &d) in grad.data_mut()[plan.t_hi * n..(plan.t_hi + 1) * n]
                .iter_mut()
                .zip(&d_blend)
            {
                *g += b * d;
            }
        }
    }
}

/// Embedding for one coordinate as `[ΣC_g, h_0, w_0]`.
pub fn grid_lookup<T: Scalar>(
    coord: &PatchCoordinate,
    grids: &[Tensor<T>],
    cfg: &ModelConfig,
) -> Result<Tensor<T>> {
    PatchCoordinate::new(coord.x, coord.y, coord.t)?;
    if grids.len() != cfg.grids.len() {
        return Err(Error::Config(format!(
            "{} grids supplied, config declares {}",
            grids.len(),
            cfg.grids.len()
        )));
    }
    for (g, spec) in grids.iter().zip(&cfg.grids) {
        if g.shape() != spec.shape() {
            return Err(Error::shape(&spec.shape(), g.shape()));
        }
    }
    let plans = plan_all(cfg, coord);
    let (h0, w0) = cfg.base_dims();
    Tensor::from_vec(&[cfg.embedding_channels(), h0, w0], lookup(grids, cfg, &plans))
}
