//! Training targets, losses and quality metrics.
//!
//! Tensors handed to these functions are planar: the last two axes are
//! height and width, every leading index selects one independent plane.
//! Videos are viewed as `[frames, 3, height, width]`.

mod filter;
mod loss;
mod ssim;

pub use filter::{gaussian_blur, gaussian_blur_adjoint, gaussian_kernel, high_pass, high_pass_adjoint};
pub use loss::{
    enhanced_target, hf_residual, l1_grad, l1_loss, mse_grad, mse_loss, psnr, psnr_from_mse, sa_loss,
    sa_loss_with_grad, total_loss, total_loss_with_grad, LossWeights, SaTerms, TargetGradient, TotalLoss,
};
pub use ssim::{level_weights, ms_ssim, ms_ssim_levels, ms_ssim_with_grad, MS_SSIM_WEIGHTS};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::video_io::VideoTensor;

/// Planar `[frames, 3, height, width]` copy of a video.
pub fn video_planar<T: Scalar>(video: &VideoTensor) -> Tensor<T> {
    let (t, h, w) = video.dims();
    let mut data = Vec::with_capacity(t * 3 * h * w);
    for f in 0..t {
        data.extend(video.frame_planar(f).into_iter().map(|v| T::lit(v as f64)));
    }
    Tensor::from_vec(&[t, 3, h, w], data).expect("dims agree")
}

/// Mean per-frame PSNR between two videos (peak 1).
pub fn video_psnr(decoded: &VideoTensor, reference: &VideoTensor) -> Result<f64> {
    psnr(&video_planar::<f64>(decoded), &video_planar::<f64>(reference), 1.0)
}

/// MS-SSIM between two videos, averaged over frames and channels.
pub fn video_ms_ssim(decoded: &VideoTensor, reference: &VideoTensor) -> Result<f64> {
    ms_ssim(&video_planar::<f64>(decoded), &video_planar::<f64>(reference))
}
