//! Procedural test videos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::video_io::VideoTensor;

/// Parameters of [`moving_checkerboard`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Checkerboard {
    /// Side of one square in pixels.
    pub cell: f64,
    /// Peak-to-peak amplitude of the checker pattern.
    pub contrast: f64,
    /// Samples per pixel along each axis for anti-aliasing.
    pub supersample: usize,
}

impl Default for Checkerboard {
    fn default() -> Self {
        Self {
            cell: 16.0,
            contrast: 0.3,
            supersample: 4,
        }
    }
}

/// A checkerboard translating with a seeded constant velocity over a smooth
/// colour gradient. The velocity, phase and gradient tint come from `seed`.
pub fn moving_checkerboard(
    frames: usize,
    height: usize,
    width: usize,
    seed: u64,
    style: Checkerboard,
) -> Result<VideoTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vx: f64 = rng.gen_range(0.75..2.0);
    let vy: f64 = rng.gen_range(0.25..1.25);
    let (px, py): (f64, f64) = (rng.gen_range(0.0..style.cell), rng.gen_range(0.0..style.cell));
    let tint: [f64; 3] = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
    let s = style.supersample.max(1);
    let mut data = Vec::with_capacity(frames * height * width * 3);
    for t in 0..frames {
        let (ox, oy) = (px + vx * t as f64, py + vy * t as f64);
        for y in 0..height {
            for x in 0..width {
                let mut on = 0.0;
                for sy in 0..s {
                    for sx in 0..s {
                        let u = x as f64 + (sx as f64 + 0.5) / s as f64 - ox;
                        let v = y as f64 + (sy as f64 + 0.5) / s as f64 - oy;
                        let parity = (u / style.cell).floor() as i64 + (v / style.cell).floor() as i64;
                        if parity.rem_euclid(2) == 0 {
                            on += 1.0;
                        }
                    }
                }
                let check = on / (s * s) as f64 - 0.5;
                let (gx, gy) = (x as f64 / width as f64, y as f64 / height as f64);
                let base = [
                    0.25 + 0.35 * gx + 0.1 * tint[0],
                    0.3 + 0.3 * gy + 0.1 * tint[1],
                    0.55 - 0.2 * gx + 0.15 * gy * tint[2],
                ];
                for b in base {
                    data.push((b + style.contrast * check).clamp(0.0, 1.0) as f32);
                }
            }
        }
    }
    VideoTensor::new(frames, height, width, data)
}
