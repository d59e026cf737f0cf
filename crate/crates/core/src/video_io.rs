//! Video frames in and out, the max-pooled supervision pyramid, and patch
//! tiling.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `T×H×W×3` pixels in `[0, 1]`, channel-last.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoTensor {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
    pub frame_rate: Option<f64>,
}

impl VideoTensor {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "video dims must be positive, got {frames}x{height}x{width}"
            )));
        }
        let expected = frames * height * width * 3;
        if data.len() != expected {
            return Err(Error::shape(&[frames, height, width, 3], &[data.len()]));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            frames,
            height,
            width,
            data,
            frame_rate: None,
        })
    }

    pub fn filled(frames: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(frames, height, width, vec![value; frames * height * width * 3])
    }

    /// Build from planar `[3, h, w]` frames.
    pub fn from_planar_frames(height: usize, width: usize, frames: &[Vec<f32>]) -> Result<Self> {
        let plane = height * width;
        let mut data = Vec::with_capacity(frames.len() * plane * 3);
        for f in frames {
            if f.len() != 3 * plane {
                return Err(Error::shape(&[3, height, width], &[f.len()]));
            }
            for p in 0..plane {
                for c in 0..3 {
                    data.push(f[c * plane + p]);
                }
            }
        }
        Self::new(frames.len(), height, width, data)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.frames * self.height * self.width
    }

    #[inline]
    pub fn at(&self, t: usize, y: usize, x: usize, c: usize) -> f32 {
        self.data[((t * self.height + y) * self.width + x) * 3 + c]
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.height * self.width * 3;
        &self.data[t * n..(t + 1) * n]
    }

    /// One frame as planar `[3, h, w]`.
    pub fn frame_planar(&self, t: usize) -> Vec<f32> {
        let plane = self.height * self.width;
        let src = self.frame(t);
        let mut out = vec![0.0; 3 * plane];
        for p in 0..plane {
            for c in 0..3 {
                out[c * plane + p] = src[p * 3 + c];
            }
        }
        out
    }

    /// Replicate the last row/column until the frame is `height × width`.
    pub fn pad_edge(&self, height: usize, width: usize) -> Result<Self> {
        if height < self.height || width < self.width {
            return Err(Error::InvalidArgument(format!(
                "cannot pad {}x{} down to {height}x{width}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.frames * height * width * 3);
        for t in 0..self.frames {
            for y in 0..height {
                let sy = y.min(self.height - 1);
                for x in 0..width {
                    let sx = x.min(self.width - 1);
                    for c in 0..3 {
                        data.push(self.at(t, sy, sx, c));
                    }
                }
            }
        }
        Ok(Self {
            frames: self.frames,
            height,
            width,
            data,
            frame_rate: self.frame_rate,
        })
    }

    /// Keep the top-left `height × width` region of every frame.
    pub fn crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width || height == 0 || width == 0 {
            return Err(Error::OutOfBounds(format!(
                "crop {height}x{width} of a {}x{} frame",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.frames * height * width * 3);
        for t in 0..self.frames {
            for y in 0..height {
                let start = ((t * self.height + y) * self.width) * 3;
                data.extend_from_slice(&self.data[start..start + width * 3]);
            }
        }
        Ok(Self {
            frames: self.frames,
            height,
            width,
            data,
            frame_rate: self.frame_rate,
        })
    }

    /// 8-bit samples, rounded to nearest.
    pub fn to_rgb24(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }
}

#[inline]
pub(crate) fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// On-disk frame layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameLayout {
    /// Directory of PNG files, ordered by file name.
    PngSequence,
    /// Interleaved 8-bit RGB, frame after frame, with known dims.
    RawRgb24(RawDims),
}

/// Sidecar describing a raw RGB24 file. Serialized as `{"T":..,"H":..,"W":..}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDims {
    #[serde(rename = "T")]
    pub frames: usize,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
}

/// `video.rgb` -> `video.rgb.json`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    let mut s = raw.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_sidecar(raw: &Path) -> Result<RawDims> {
    let p = sidecar_path(raw);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Load a PNG directory, or a raw RGB24 file whose dims come from its
/// JSON sidecar.
pub fn load_video(path: &Path) -> Result<VideoTensor> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    if path.is_dir() {
        load_frames(path, FrameLayout::PngSequence)
    } else {
        let dims = read_sidecar(path)?;
        load_frames(path, FrameLayout::RawRgb24(dims))
    }
}

pub fn load_frames(path: &Path, layout: FrameLayout) -> Result<VideoTensor> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    match layout {
        FrameLayout::PngSequence => load_png_sequence(path),
        FrameLayout::RawRgb24(dims) => load_raw(path, dims),
    }
}

fn load_raw(path: &Path, dims: RawDims) -> Result<VideoTensor> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if dims.frames == 0 || bytes.is_empty() {
        return Err(Error::NoFrames(path.to_path_buf()));
    }
    let expected = dims.frames * dims.height * dims.width * 3;
    if bytes.len() != expected {
        return Err(Error::InconsistentFrames(format!(
            "{}: {} bytes for {}x{}x{} RGB24 (expected {expected})",
            path.display(),
            bytes.len(),
            dims.frames,
            dims.height,
            dims.width
        )));
    }
    let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
    VideoTensor::new(dims.frames, dims.height, dims.width, data)
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("png"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

fn read_png(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Image(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let raw = &buf[..info.buffer_size()];
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::Image(format!("{}: unexpanded palette", path.display())))
        }
    };
    let mut rgb = Vec::with_capacity(w * h * 3);
    for px in raw.chunks_exact(channels) {
        match channels {
            1 | 2 => rgb.extend_from_slice(&[px[0], px[0], px[0]]),
            _ => rgb.extend_from_slice(&px[..3]),
        }
    }
    Ok((h, w, rgb))
}

fn load_png_sequence(dir: &Path) -> Result<VideoTensor> {
    let files = png_files(dir)?;
    if files.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    let mut dims = None;
    let mut data = Vec::new();
    for f in &files {
        let (h, w, rgb) = read_png(f)?;
        match dims {
            None => dims = Some((h, w)),
            Some(d) if d != (h, w) => {
                return Err(Error::InconsistentFrames(format!(
                    "{} is {h}x{w}, earlier frames are {}x{}",
                    f.display(),
                    d.0,
                    d.1
                )))
            }
            _ => {}
        }
        data.extend(rgb.iter().map(|&b| b as f32 / 255.0));
    }
    let (h, w) = dims.expect("at least one frame");
    VideoTensor::new(files.len(), h, w, data)
}

/// Write `frame_00000.png`, ... into `dir` (created if needed).
pub fn store_png_sequence(video: &VideoTensor, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bytes = video.to_rgb24();
    let n = video.height * video.width * 3;
    let mut written = Vec::with_capacity(video.frames);
    for t in 0..video.frames {
        let path = dir.join(format!("frame_{t:05}.png"));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), video.width as u32, video.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        writer
            .write_image_data(&bytes[t * n..(t + 1) * n])
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        writer
            .finish()
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

/// Write interleaved RGB24 bytes plus the JSON sidecar.
pub fn store_raw(video: &VideoTensor, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    f.write_all(&video.to_rgb24())
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))?;
    let dims = RawDims {
        frames: video.frames,
        height: video.height,
        width: video.width,
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_vec(&dims)?).map_err(|e| Error::io(&side, e))
}

/// Supervision targets `V_1 … V_S`, coarsest first; `levels[S-1]` is the
/// (padded) input.
#[derive(Clone, Debug)]
pub struct GroundTruthPyramid {
    pub levels: Vec<VideoTensor>,
    pub scale_factor: usize,
}

impl GroundTruthPyramid {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Level `r` in `1..=S`.
    pub fn level(&self, r: usize) -> &VideoTensor {
        &self.levels[r - 1]
    }

    pub fn full(&self) -> &VideoTensor {
        self.levels.last().expect("pyramid has at least one level")
    }
}

/// Per-frame, per-channel max pooling with window = stride = `factor`.
pub fn max_pool(video: &VideoTensor, factor: usize) -> Result<VideoTensor> {
    if factor < 1 || video.height % factor != 0 || video.width % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "{}x{} frame not divisible by pooling factor {factor}",
            video.height, video.width
        )));
    }
    let (h, w) = (video.height / factor, video.width / factor);
    let mut data = Vec::with_capacity(video.frames * h * w * 3);
    for t in 0..video.frames {
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut m = f32::NEG_INFINITY;
                    for dy in 0..factor {
                        for dx in 0..factor {
                            m = m.max(video.at(t, y * factor + dy, x * factor + dx, c));
                        }
                    }
                    data.push(m);
                }
            }
        }
    }
    Ok(VideoTensor {
        frames: video.frames,
        height: h,
        width: w,
        data,
        frame_rate: video.frame_rate,
    })
}

/// Cascade of max-pool downsamplings; frames are edge-padded first when
/// their dims are not divisible by `scale_factor^(S-1)`.
pub fn build_pyramid(
    video: &VideoTensor,
    num_levels: usize,
    scale_factor: usize,
) -> Result<GroundTruthPyramid> {
    if num_levels < 1 {
        return Err(Error::InvalidArgument("pyramid needs at least one level".into()));
    }
    if scale_factor < 2 {
        return Err(Error::InvalidArgument(format!(
            "pyramid scale factor must be at least 2, got {scale_factor}"
        )));
    }
    let div = scale_factor.pow(num_levels as u32 - 1);
    let padded = video.pad_edge(video.height.div_ceil(div) * div, video.width.div_ceil(div) * div)?;
    let mut levels = vec![padded];
    for _ in 1..num_levels {
        let next = max_pool(levels.last().expect("non-empty"), scale_factor)?;
        levels.push(next);
    }
    levels.reverse();
    Ok(GroundTruthPyramid {
        levels,
        scale_factor,
    })
}

/// Patch size and the patch grid that tiles one frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub patch_h: usize,
    pub patch_w: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl PatchSpec {
    /// Smallest grid of `patch_h × patch_w` tiles covering a `height × width`
    /// frame.
    pub fn covering(height: usize, width: usize, patch_h: usize, patch_w: usize) -> Result<Self> {
        if patch_h == 0 || patch_w == 0 {
            return Err(Error::InvalidArgument("patch dims must be positive".into()));
        }
        Ok(Self {
            patch_h,
            patch_w,
            grid_rows: height.div_ceil(patch_h),
            grid_cols: width.div_ceil(patch_w),
        })
    }

    pub fn frame_height(&self) -> usize {
        self.patch_h * self.grid_rows
    }

    pub fn frame_width(&self) -> usize {
        self.patch_w * self.grid_cols
    }

    pub fn patches_per_frame(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn check_tiles(&self, height: usize, width: usize) -> Result<()> {
        if self.frame_height() != height || self.frame_width() != width {
            return Err(Error::InvalidArgument(format!(
                "{}x{} patches in a {}x{} grid do not tile a {height}x{width} frame",
                self.patch_h, self.patch_w, self.grid_rows, self.grid_cols
            )));
        }
        Ok(())
    }
}

/// Normalized patch centre and frame position, all in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchCoordinate {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PatchCoordinate {
    pub fn new(x: f64, y: f64, t: f64) -> Result<Self> {
        for (name, v) in [("x", x), ("y", y), ("t", t)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfBounds(format!("coordinate {name}={v} outside [0, 1]")));
            }
        }
        Ok(Self { x, y, t })
    }
}

/// Pixel window of one patch in one frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PatchWindow {
    pub frame: usize,
    pub y0: usize,
    pub x0: usize,
    pub height: usize,
    pub width: usize,
}

impl PatchWindow {
    /// The co-located window in a map downscaled by `factor`.
    pub fn scaled_down(&self, factor: usize) -> Self {
        Self {
            frame: self.frame,
            y0: self.y0 / factor,
            x0: self.x0 / factor,
            height: self.height / factor,
            width: self.width / factor,
        }
    }
}

/// Every `(patch, frame)` pair in frame-major, row-major order.
pub fn enumerate_patches(
    frames: usize,
    height: usize,
    width: usize,
    spec: &PatchSpec,
) -> Result<Vec<(PatchCoordinate, PatchWindow)>> {
    spec.check_tiles(height, width)?;
    let mut out = Vec::with_capacity(frames * spec.patches_per_frame());
    for f in 0..frames {
        let t = if frames == 1 {
            0.0
        } else {
            f as f64 / (frames - 1) as f64
        };
        for row in 0..spec.grid_rows {
            for col in 0..spec.grid_cols {
                let coord = PatchCoordinate {
                    x: (col as f64 + 0.5) / spec.grid_cols as f64,
                    y: (row as f64 + 0.5) / spec.grid_rows as f64,
                    t,
                };
                let window = PatchWindow {
                    frame: f,
                    y0: row * spec.patch_h,
                    x0: col * spec.patch_w,
                    height: spec.patch_h,
                    width: spec.patch_w,
                };
                out.push((coord, window));
            }
        }
    }
    Ok(out)
}

fn check_window(video: &VideoTensor, w: &PatchWindow) -> Result<()> {
    if w.frame >= video.frames
        || w.y0 + w.height > video.height
        || w.x0 + w.width > video.width
        || w.height == 0
        || w.width == 0
    {
        return Err(Error::OutOfBounds(format!(
            "window {w:?} outside a {}x{}x{} video",
            video.frames, video.height, video.width
        )));
    }
    Ok(())
}

/// Channel-last `H_p × W_p × 3` copy of one window.
pub fn extract_patch(video: &VideoTensor, window: &PatchWindow) -> Result<Vec<f32>> {
    check_window(video, window)?;
    let mut out = Vec::with_capacity(window.height * window.width * 3);
    for y in window.y0..window.y0 + window.height {
        let start = ((window.frame * video.height + y) * video.width + window.x0) * 3;
        out.extend_from_slice(&video.data[start..start + window.width * 3]);
    }
    Ok(out)
}

/// Planar `[3, H_p, W_p]` copy of one window.
pub fn extract_patch_planar(video: &VideoTensor, window: &PatchWindow) -> Result<Vec<f32>> {
    check_window(video, window)?;
    let plane = window.height * window.width;
    let mut out = vec![0.0; 3 * plane];
    for (i, y) in (window.y0..window.y0 + window.height).enumerate() {
        for (j, x) in (window.x0..window.x0 + window.width).enumerate() {
            for c in 0..3 {
                out[c * plane + i * window.width + j] = video.at(window.frame, y, x, c);
            }
        }
    }
    Ok(out)
}
