//! Whole-video reconstruction by stitching per-patch predictions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::video_io::{enumerate_patches, PatchSpec, VideoTensor};

/// Level-`level` reconstruction of every frame, at the padded resolution
/// `(frame / f^(S-level))`. Only stages `1..=level` are evaluated.
pub fn render_level<T: Scalar>(model: &Model<T>, frames: usize, spec: &PatchSpec, level: usize) -> Result<VideoTensor> {
    model.check_level(level)?;
    let cfg = model.config();
    if spec.frame_height() != cfg.frame_height
        || spec.frame_width() != cfg.frame_width
        || spec.patch_h != cfg.patch_height
        || spec.patch_w != cfg.patch_width
    {
        return Err(Error::Config(format!(
            "patch spec {spec:?} does not match the model geometry {}x{} / {}x{}",
            cfg.frame_height, cfg.frame_width, cfg.patch_height, cfg.patch_width
        )));
    }
    let down = cfg.upsample_factor.pow((cfg.num_stages - level) as u32);
    let (fh, fw) = (cfg.frame_height / down, cfg.frame_width / down);
    let patches = enumerate_patches(frames, cfg.frame_height, cfg.frame_width, spec)?;
    let outputs: Vec<Vec<T>> = patches
        .par_iter()
        .map(|(coord, _)| model.forward_level(coord, level).map(|t| t.into_data()))
        .collect::<Result<_>>()?;
    let mut data = vec![0.0f32; frames * fh * fw * 3];
    for ((_, window), out) in patches.iter().zip(outputs) {
        let w = window.scaled_down(down);
        let plane = w.height * w.width;
        for y in 0..w.height {
            for x in 0..w.width {
                let base = ((w.frame * fh + w.y0 + y) * fw + w.x0 + x) * 3;
                for c in 0..3 {
                    let v = out[c * plane + y * w.width + x].as_f64() as f32;
                    data[base + c] = v.clamp(0.0, 1.0);
                }
            }
        }
    }
    VideoTensor::new(frames, fh, fw, data)
}

/// Output size of level `level` for an original `height × width` video:
/// the padded level size with the padding removed.
pub fn level_crop(height: usize, width: usize, down: usize) -> (usize, usize) {
    (height.div_ceil(down), width.div_ceil(down))
}

/// [`render_level`] cropped back to the original video extent.
pub fn reconstruct<T: Scalar>(
    model: &Model<T>,
    frames: usize,
    height: usize,
    width: usize,
    spec: &PatchSpec,
    level: usize,
) -> Result<VideoTensor> {
    let full = render_level(model, frames, spec, level)?;
    let cfg = model.config();
    let down = cfg.upsample_factor.pow((cfg.num_stages - level) as u32);
    let (h, w) = level_crop(height, width, down);
    full.crop(h, w)
}
