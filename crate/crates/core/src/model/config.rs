use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    Sigmoid,
    Clamp,
}

/// Which branches of the upsampling block are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMode {
    /// Bilinear prior plus learnable sub-pixel branch.
    #[default]
    Hybrid,
    /// Sub-pixel branch only.
    LearnableOnly,
    /// Bilinear branch only, with the fixed channel projection.
    BilinearOnly,
}

/// One learnable feature grid: `frames × channels × height × width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl GridSpec {
    pub fn numel(&self) -> usize {
        self.frames * self.channels * self.height * self.width
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.frames, self.channels, self.height, self.width]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub num_stages: usize,
    pub base_channels: usize,
    pub channel_decay: f64,
    pub upsample_factor: usize,
    pub dw_kernel: usize,
    /// Depthwise kernel of the learnable upsampling branch.
    pub upsample_dw_kernel: usize,
    pub mlp_expand: f64,
    pub falayers_per_stage: usize,
    /// 0 = linear head.
    pub head_hidden: usize,
    pub output_activation: OutputActivation,
    pub upsample_mode: UpsampleMode,
    /// Padded frame size covered by the grids.
    pub frame_height: usize,
    pub frame_width: usize,
    pub patch_height: usize,
    pub patch_width: usize,
    pub grids: Vec<GridSpec>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_stages: 3,
            base_channels: 64,
            channel_decay: 0.6,
            upsample_factor: 2,
            dw_kernel: 7,
            upsample_dw_kernel: 3,
            mlp_expand: 2.0,
            falayers_per_stage: 1,
            head_hidden: 0,
            output_activation: OutputActivation::Sigmoid,
            upsample_mode: UpsampleMode::Hybrid,
            frame_height: 0,
            frame_width: 0,
            patch_height: 0,
            patch_width: 0,
            grids: Vec::new(),
        }
    }
}

/// Parameter counts per component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub grids: usize,
    pub stages: Vec<usize>,
    pub total: usize,
}

impl ModelConfig {
    /// Fill in geometry and the default two-grid embedding for a padded
    /// `frame_height × frame_width` video of `frames` frames.
    pub fn with_geometry(
        mut self,
        frames: usize,
        frame_height: usize,
        frame_width: usize,
        patch_height: usize,
        patch_width: usize,
    ) -> Self {
        self.frame_height = frame_height;
        self.frame_width = frame_width;
        self.patch_height = patch_height;
        self.patch_width = patch_width;
        if self.grids.is_empty() {
            let div = self.total_upsampling().max(1);
            let (gh, gw) = ((frame_height / div).max(1), (frame_width / div).max(1));
            self.grids = vec![
                GridSpec {
                    frames,
                    channels: 16,
                    height: gh,
                    width: gw,
                },
                GridSpec {
                    frames: frames.div_ceil(4),
                    channels: 16,
                    height: gh,
                    width: gw,
                },
            ];
        }
        self
    }

    /// `upsample_factor^S`.
    pub fn total_upsampling(&self) -> usize {
        self.upsample_factor.pow(self.num_stages as u32)
    }

    /// Spatial size of the embedding fed to stage 1.
    pub fn base_dims(&self) -> (usize, usize) {
        let d = self.total_upsampling().max(1);
        (self.patch_height / d, self.patch_width / d)
    }

    /// Output size of head `r` (1-based).
    pub fn level_dims(&self, r: usize) -> (usize, usize) {
        let (h, w) = self.base_dims();
        let f = self.upsample_factor.pow(r as u32);
        (h * f, w * f)
    }

    pub fn embedding_channels(&self) -> usize {
        self.grids.iter().map(|g| g.channels).sum()
    }

    /// `C_i = max(round(C_1 · ρ^(i-1)), 4)` for `i` in `1..=S`.
    pub fn stage_channels(&self, i: usize) -> usize {
        let c = (self.base_channels as f64 * self.channel_decay.powi(i as i32 - 1)).round() as usize;
        c.max(4)
    }

    pub fn stage_input_channels(&self, i: usize) -> usize {
        if i == 1 {
            self.embedding_channels()
        } else {
            self.stage_channels(i - 1)
        }
    }

    pub fn mlp_hidden(&self, channels: usize) -> usize {
        ((channels as f64 * self.mlp_expand).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_stages < 2 {
            return fail(format!("num_stages must be at least 2, got {}", self.num_stages));
        }
        if self.upsample_factor == 0 {
            return fail("upsample_factor must be positive".into());
        }
        if self.base_channels == 0 {
            return fail("base_channels must be positive".into());
        }
        if !(self.channel_decay > 0.0 && self.channel_decay <= 1.0) {
            return fail(format!("channel_decay {} outside (0, 1]", self.channel_decay));
        }
        if self.dw_kernel % 2 == 0 || self.upsample_dw_kernel % 2 == 0 {
            return fail("depthwise kernels must be odd".into());
        }
        if self.mlp_expand <= 0.0 {
            return fail("mlp_expand must be positive".into());
        }
        if self.grids.is_empty() {
            return fail("at least one feature grid is required".into());
        }
        let c0 = self.grids[0].channels;
        if self.grids.iter().any(|g| g.channels != c0 || g.numel() == 0) {
            return fail("feature grids must be non-empty with equal channel counts".into());
        }
        let d = self.total_upsampling();
        if self.patch_height == 0
            || self.patch_width == 0
            || self.patch_height % d != 0
            || self.patch_width % d != 0
        {
            return fail(format!(
                "patch {}x{} not divisible by total upsampling {d}",
                self.patch_height, self.patch_width
            ));
        }
        if self.frame_height % self.patch_height != 0 || self.frame_width % self.patch_width != 0 {
            return fail(format!(
                "frame {}x{} not tiled by {}x{} patches",
                self.frame_height, self.frame_width, self.patch_height, self.patch_width
            ));
        }
        let (h1, w1) = self.level_dims(1);
        let min_dim = h1.min(w1);
        if self.dw_kernel > 2 * min_dim + 1 {
            return fail(format!(
                "dw kernel {} larger than 2*{min_dim}+1 at stage 1",
                self.dw_kernel
            ));
        }
        Ok(())
    }

    /// Exact learnable scalar counts implied by this configuration.
    pub fn parameter_counts(&self) -> ParamCount {
        let grids: usize = self.grids.iter().map(GridSpec::numel).sum();
        let f2 = self.upsample_factor * self.upsample_factor;
        let stages: Vec<usize> = (1..=self.num_stages)
            .map(|i| {
                let cin = self.stage_input_channels(i);
                let c = self.stage_channels(i);
                let mut n = 0;
                if self.upsample_mode != UpsampleMode::BilinearOnly {
                    let k = self.upsample_dw_kernel;
                    n += cin * c * f2 + c * f2 + c * k * k + c;
                }
                let hid = self.mlp_hidden(c);
                let k = self.dw_kernel;
                let falayer = c * k * k + c + 2 * c + hid * c + hid + c * hid + c;
                n += falayer * self.falayers_per_stage;
                n += if self.head_hidden > 0 {
                    self.head_hidden * c + self.head_hidden + 3 * self.head_hidden + 3
                } else {
                    3 * c + 3
                };
                n
            })
            .collect();
        let total = grids + stages.iter().sum::<usize>();
        ParamCount {
            grids,
            stages,
            total,
        }
    }

    /// Pick `base_channels` so the total parameter count lands within
    /// `tolerance` (relative) of `budget`, by bisection over `C_1`.
    pub fn fit_parameter_budget(&self, budget: usize, tolerance: f64) -> Result<ModelConfig> {
        let count = |c1: usize| {
            let mut cfg = self.clone();
            cfg.base_channels = c1;
            cfg.parameter_counts().total
        };
        let (mut lo, mut hi) = (1usize, 2usize);
        while count(hi) < budget {
            hi *= 2;
            if hi > 1 << 20 {
                return Err(Error::Config(format!("budget {budget} unreachable")));
            }
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if count(mid) >= budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let best = [lo, hi]
            .into_iter()
            .min_by_key(|&c| count(c).abs_diff(budget))
            .expect("two candidates");
        let got = count(best);
        let rel = got.abs_diff(budget) as f64 / budget as f64;
        if rel > tolerance {
            return Err(Error::Config(format!(
                "closest count {got} is {:.2}% away from budget {budget}",
                rel * 100.0
            )));
        }
        let mut cfg = self.clone();
        cfg.base_channels = best;
        Ok(cfg)
    }
}
