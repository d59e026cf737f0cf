use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::VideoDims;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::Tensor;
use crate::video_io::{
    build_pyramid, enumerate_patches, extract_patch_planar, GroundTruthPyramid, PatchCoordinate, PatchSpec,
    PatchWindow, VideoTensor,
};

/// A video prepared for patch-wise fitting: padded to whole patches, with
/// its supervision pyramid and patch list.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub original: VideoTensor,
    pub pyramid: GroundTruthPyramid,
    pub spec: PatchSpec,
    pub patches: Vec<(PatchCoordinate, PatchWindow)>,
}

impl TrainingSet {
    /// `config` must already carry the padded geometry of `video`
    /// (see [`model_geometry`]).
    pub fn new(video: &VideoTensor, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let (ph, pw) = (config.patch_height, config.patch_width);
        let spec = PatchSpec::covering(video.height(), video.width(), ph, pw)?;
        if spec.frame_height() != config.frame_height || spec.frame_width() != config.frame_width {
            return Err(Error::Config(format!(
                "model geometry {}x{} does not match the padded video {}x{}",
                config.frame_height,
                config.frame_width,
                spec.frame_height(),
                spec.frame_width()
            )));
        }
        let padded = video.pad_edge(spec.frame_height(), spec.frame_width())?;
        let pyramid = build_pyramid(&padded, config.num_stages, config.upsample_factor)?;
        let patches = enumerate_patches(video.frames(), spec.frame_height(), spec.frame_width(), &spec)?;
        Ok(Self {
            original: video.clone(),
            pyramid,
            spec,
            patches,
        })
    }

    pub fn dims(&self) -> VideoDims {
        VideoDims {
            frames: self.original.frames(),
            height: self.original.height(),
            width: self.original.width(),
        }
    }
}

/// Fill in frame/patch geometry (and default grids) for `video`.
pub fn model_geometry(base: &ModelConfig, video: &VideoTensor, patch_h: usize, patch_w: usize) -> Result<ModelConfig> {
    let spec = PatchSpec::covering(video.height(), video.width(), patch_h, patch_w)?;
    Ok(base
        .clone()
        .with_geometry(video.frames(), spec.frame_height(), spec.frame_width(), patch_h, patch_w))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchItem {
    pub coord: PatchCoordinate,
    pub window: PatchWindow,
    /// Co-located target windows, coarsest level first, planar `[3, h, w]`.
    pub targets: Vec<Tensor<f32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

/// Patch order for one epoch, a pure function of `(seed, epoch)`.
pub fn epoch_order(count: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng);
    order
}

/// Every `(patch, frame)` exactly once, shuffled by `(seed, epoch)` and cut
/// into batches of `batch_patches`.
pub fn make_batches(
    pyramid: &GroundTruthPyramid,
    spec: &PatchSpec,
    seed: u64,
    epoch: usize,
    batch_patches: usize,
) -> Result<Vec<Batch>> {
    if batch_patches == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let full = pyramid.full();
    let patches = enumerate_patches(full.frames(), full.height(), full.width(), spec)?;
    let order = epoch_order(patches.len(), seed, epoch);
    let s = pyramid.num_levels();
    let factor = pyramid.scale_factor;
    let mut batches = Vec::with_capacity(order.len().div_ceil(batch_patches));
    for chunk in order.chunks(batch_patches) {
        let items = chunk
            .iter()
            .map(|&i| {
                let (coord, window) = patches[i];
                let targets = (1..=s)
                    .map(|r| {
                        let w = window.scaled_down(factor.pow((s - r) as u32));
                        let data = extract_patch_planar(pyramid.level(r), &w)?;
                        Tensor::from_vec(&[3, w.height, w.width], data)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(BatchItem { coord, window, targets })
            })
            .collect::<Result<Vec<_>>>()?;
        batches.push(Batch { items });
    }
    Ok(batches)
}
