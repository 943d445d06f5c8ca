//! Frame preparation: rescale so the short side is 128, center crop to
//! 112 × 112, select a 16-frame window with loop padding, and subtract
//! per-channel means.

use image::imageops::{self, FilterType};
use image::RgbImage;

use super::Tensor;
use crate::error::{Error, Result};

pub const CLIP_FRAMES: usize = 16;
pub const CROP_SIZE: usize = 112;
pub const SHORT_SIDE: usize = 128;

/// Geometry of the clip a model expects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClipGeometry {
    pub frames: usize,
    pub crop: usize,
    pub short_side: usize,
}

impl Default for ClipGeometry {
    fn default() -> Self {
        ClipGeometry {
            frames: CLIP_FRAMES,
            crop: CROP_SIZE,
            short_side: SHORT_SIDE,
        }
    }
}

impl ClipGeometry {
    /// Geometry for a square `crop` input, keeping the 128:112 rescale ratio.
    pub fn for_input(frames: usize, crop: usize) -> Self {
        ClipGeometry {
            frames,
            crop,
            short_side: (crop * SHORT_SIDE).div_ceil(CROP_SIZE),
        }
    }
}

/// A preprocessed RGB clip, channel-major (`3 × t × h × w`).
#[derive(Clone, Debug, PartialEq)]
pub struct ClipTensor {
    t: usize,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl ClipTensor {
    pub fn new(t: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * t * h * w || t * h * w == 0 {
            return Err(Error::Size(format!(
                "clip 3x{t}x{h}x{w} needs {} values, got {}",
                3 * t * h * w,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("clip contains non-finite values"));
        }
        Ok(ClipTensor { t, h, w, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.t, self.h, self.w)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![3, self.t, self.h, self.w], self.data.clone()).expect("clip shape")
    }
}

/// Indices of the frames forming the window that starts at `start`: up to
/// `len` consecutive frames, cycled from the window's first frame when the
/// video runs out.
pub fn window_indices(n_frames: usize, start: usize, len: usize) -> Result<Vec<usize>> {
    if n_frames == 0 {
        return Err(Error::input("empty frame list"));
    }
    if start >= n_frames {
        return Err(Error::input(format!(
            "window start {start} is past the last frame ({n_frames} frames)"
        )));
    }
    let avail = (n_frames - start).min(len);
    Ok((0..len).map(|i| start + i % avail).collect())
}

/// Rescales so the short side is `short_side`, then center crops to a
/// `crop × crop` square.
pub fn scale_and_crop(frame: &RgbImage, geom: ClipGeometry) -> RgbImage {
    let (w, h) = frame.dimensions();
    let short = w.min(h) as f64;
    let scale = geom.short_side as f64 / short;
    let nw = ((w as f64 * scale).round() as u32).max(geom.crop as u32);
    let nh = ((h as f64 * scale).round() as u32).max(geom.crop as u32);
    let resized = if (nw, nh) == (w, h) {
        frame.clone()
    } else {
        imageops::resize(frame, nw, nh, FilterType::Triangle)
    };
    let x0 = (nw - geom.crop as u32) / 2;
    let y0 = (nh - geom.crop as u32) / 2;
    imageops::crop_imm(&resized, x0, y0, geom.crop as u32, geom.crop as u32).to_image()
}

/// Selects the window starting at `start` and brings each frame to clip
/// geometry. The result is what relevance volumes and flow fields are
/// aligned to.
pub fn prepare_frames(frames: &[RgbImage], start: usize, geom: ClipGeometry) -> Result<Vec<RgbImage>> {
    if frames.is_empty() {
        return Err(Error::input("empty frame list"));
    }
    let dims = frames[0].dimensions();
    if let Some(i) = frames.iter().position(|f| f.dimensions() != dims) {
        return Err(Error::input(format!(
            "frame {i} is {:?}, frame 0 is {dims:?}",
            frames[i].dimensions()
        )));
    }
    let idx = window_indices(frames.len(), start, geom.frames)?;
    let distinct = idx.iter().copied().max().map_or(0, |m| m + 1);
    let prepared: Vec<RgbImage> = frames[start..distinct]
        .iter()
        .map(|f| scale_and_crop(f, geom))
        .collect();
    Ok(idx.into_iter().map(|i| prepared[i - start].clone()).collect())
}

/// Packs equally-sized frames into a mean-subtracted clip.
pub fn frames_to_clip(frames: &[RgbImage], means: [f32; 3]) -> Result<ClipTensor> {
    let first = frames.first().ok_or_else(|| Error::input("empty frame list"))?;
    let (w, h) = first.dimensions();
    let (w, h) = (w as usize, h as usize);
    let t = frames.len();
    let mut data = vec![0.0f32; 3 * t * h * w];
    for (ti, f) in frames.iter().enumerate() {
        if f.dimensions() != first.dimensions() {
            return Err(Error::input(format!("frame {ti} has different dimensions")));
        }
        for (x, y, px) in f.enumerate_pixels() {
            for c in 0..3 {
                data[((c * t + ti) * h + y as usize) * w + x as usize] = px[c] as f32 - means[c];
            }
        }
    }
    ClipTensor::new(t, h, w, data)
}

/// Full preprocessing of one window.
pub fn preprocess_clip(frames: &[RgbImage], means: [f32; 3]) -> Result<ClipTensor> {
    preprocess_window(frames, 0, means, ClipGeometry::default())
}

pub fn preprocess_window(
    frames: &[RgbImage],
    start: usize,
    means: [f32; 3],
    geom: ClipGeometry,
) -> Result<ClipTensor> {
    frames_to_clip(&prepare_frames(frames, start, geom)?, means)
}
