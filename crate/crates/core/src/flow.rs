//! Dense optical flow (Horn–Schunck) as motion ground truth.
//!
//! Flow is measured in pixels per frame: `u` along `w`, `v` along `h`.

use std::fs;
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;

use crate::binio::{checked_product, put_f32s, ByteReader};
use crate::error::{Error, Result};
use crate::volume::{Dims3, Volume3};

pub const SRFL_MAGIC: &[u8; 4] = b"SRFL";
pub const SRFL_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    /// Smoothness weight; intensities are on the 0–255 scale.
    pub alpha: f32,
    pub iterations: usize,
    /// RGB weights for grayscale conversion.
    pub gray_weights: [f32; 3],
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            alpha: 10.0,
            iterations: 200,
            gray_weights: [0.299, 0.587, 0.114],
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::input(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(Error::input("iterations must be >= 1"));
        }
        if self.gray_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::input("gray weights must be finite"));
        }
        Ok(())
    }
}

/// A single-channel `h × w` image.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl GrayFrame {
    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if h * w != data.len() {
            return Err(Error::Size(format!("{h}×{w} frame needs {} values, got {}", h * w, data.len())));
        }
        Ok(GrayFrame { h, w, data })
    }

    pub fn from_fn(h: usize, w: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let data = (0..h * w).map(|i| f(i / w, i % w)).collect();
        GrayFrame { h, w, data }
    }

    pub fn from_rgb(img: &RgbImage, weights: [f32; 3]) -> Self {
        let (w, h) = img.dimensions();
        let data = img
            .pixels()
            .map(|p| weights[0] * p[0] as f32 + weights[1] * p[1] as f32 + weights[2] * p[2] as f32)
            .collect();
        GrayFrame {
            h: h as usize,
            w: w as usize,
            data,
        }
    }
}

/// Displacement of one frame pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowPair {
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    h: usize,
    w: usize,
    pairs: Vec<FlowPair>,
}

impl FlowField {
    pub fn new(h: usize, w: usize, pairs: Vec<FlowPair>) -> Result<Self> {
        if pairs.is_empty() || h == 0 || w == 0 {
            return Err(Error::input("flow field needs at least one non-empty pair"));
        }
        for (i, p) in pairs.iter().enumerate() {
            if p.u.len() != h * w || p.v.len() != h * w {
                return Err(Error::Size(format!("flow pair {i} does not match {h}×{w}")));
            }
            if p.u.iter().chain(&p.v).any(|x| !x.is_finite()) {
                return Err(Error::input(format!("flow pair {i} has non-finite values")));
            }
        }
        Ok(FlowField { h, w, pairs })
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn pairs(&self) -> &[FlowPair] {
        &self.pairs
    }

    pub fn pair(&self, i: usize) -> &FlowPair {
        &self.pairs[i]
    }
}

/// Replicate-border central difference along `w` and `h`.
fn gradients(f: &GrayFrame) -> (Vec<f32>, Vec<f32>) {
    let (h, w) = (f.h, f.w);
    let at = |y: usize, x: usize| f.data[y * w + x];
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            gx[y * w + x] = 0.5 * (at(y, (x + 1).min(w - 1)) - at(y, x.saturating_sub(1)));
            gy[y * w + x] = 0.5 * (at((y + 1).min(h - 1), x) - at(y.saturating_sub(1), x));
        }
    }
    (gx, gy)
}

/// Horn–Schunck neighbourhood average: 1/6 for edge neighbours, 1/12 for
/// corners, replicate border.
fn local_mean(src: &[f32], out: &mut [f32], h: usize, w: usize) {
    for y in 0..h {
        let ym = y.saturating_sub(1) * w;
        let y0 = y * w;
        let yp = (y + 1).min(h - 1) * w;
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let edge = src[ym + x] + src[yp + x] + src[y0 + xm] + src[y0 + xp];
            let corner = src[ym + xm] + src[ym + xp] + src[yp + xm] + src[yp + xp];
            out[y0 + x] = edge / 6.0 + corner / 12.0;
        }
    }
}

/// Flow from `f1` to `f2`.
///
/// Spatial gradients are the mean of both frames' central differences,
/// the temporal gradient is `f2 − f1`, and the flow starts at zero.
pub fn horn_schunck_pair(f1: &GrayFrame, f2: &GrayFrame, params: &FlowParams) -> Result<FlowPair> {
    params.validate()?;
    if (f1.h, f1.w) != (f2.h, f2.w) {
        return Err(Error::input(format!(
            "frame dims differ: {}×{} vs {}×{}",
            f1.h, f1.w, f2.h, f2.w
        )));
    }
    let (h, w) = (f1.h, f1.w);
    if h < 2 || w < 2 {
        return Err(Error::Size(format!("flow needs frames of at least 2×2, got {h}×{w}")));
    }
    let (gx1, gy1) = gradients(f1);
    let (gx2, gy2) = gradients(f2);
    let n = h * w;
    let ix: Vec<f32> = (0..n).map(|i| 0.5 * (gx1[i] + gx2[i])).collect();
    let iy: Vec<f32> = (0..n).map(|i| 0.5 * (gy1[i] + gy2[i])).collect();
    let it: Vec<f32> = (0..n).map(|i| f2.data[i] - f1.data[i]).collect();
    let a2 = params.alpha * params.alpha;
    let denom: Vec<f32> = (0..n).map(|i| a2 + ix[i] * ix[i] + iy[i] * iy[i]).collect();

    let mut u = vec![0.0f32; n];
    let mut v = vec![0.0f32; n];
    let mut ub = vec![0.0f32; n];
    let mut vb = vec![0.0f32; n];
    for _ in 0..params.iterations {
        local_mean(&u, &mut ub, h, w);
        local_mean(&v, &mut vb, h, w);
        for i in 0..n {
            let k = (ix[i] * ub[i] + iy[i] * vb[i] + it[i]) / denom[i];
            u[i] = ub[i] - ix[i] * k;
            v[i] = vb[i] - iy[i] * k;
        }
    }
    Ok(FlowPair { u, v })
}

/// Flow over grayscale frames; pairs are solved in parallel.
pub fn dense_flow_gray(frames: &[GrayFrame], params: &FlowParams) -> Result<FlowField> {
    if frames.len() < 2 {
        return Err(Error::input(format!("flow needs at least 2 frames, got {}", frames.len())));
    }
    let pairs = frames
        .par_windows(2)
        .map(|p| horn_schunck_pair(&p[0], &p[1], params))
        .collect::<Result<Vec<_>>>()?;
    FlowField::new(frames[0].h, frames[0].w, pairs)
}

/// Grayscale conversion followed by a solve on each consecutive pair.
pub fn dense_flow(frames: &[RgbImage], params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    let gray: Vec<GrayFrame> = frames
        .iter()
        .map(|f| GrayFrame::from_rgb(f, params.gray_weights))
        .collect();
    dense_flow_gray(&gray, params)
}

/// `√(u² + v²)` per voxel, with the last pair repeated so the volume has
/// `pair_count + 1` frames.
pub fn flow_magnitude(field: &FlowField) -> Volume3 {
    let (h, w) = field.dims();
    let mut data = Vec::with_capacity((field.pair_count() + 1) * h * w);
    for p in field.pairs() {
        data.extend(p.u.iter().zip(&p.v).map(|(&a, &b)| a.hypot(b)));
    }
    let last = data.len() - h * w;
    data.extend_from_within(last..);
    Volume3::from_raw(Dims3::new(field.pair_count() + 1, h, w), data)
}

pub fn encode_srfl(field: &FlowField) -> Vec<u8> {
    let (h, w) = field.dims();
    let mut out = Vec::with_capacity(18 + 8 * h * w * field.pair_count());
    out.extend_from_slice(SRFL_MAGIC);
    out.extend_from_slice(&SRFL_VERSION.to_le_bytes());
    for n in [field.pair_count(), h, w] {
        out.extend_from_slice(&u32::try_from(n).expect("flow dim exceeds u32").to_le_bytes());
    }
    for p in field.pairs() {
        put_f32s(&mut out, &p.u);
        put_f32s(&mut out, &p.v);
    }
    out
}

pub fn decode_srfl(bytes: &[u8]) -> Result<FlowField> {
    let mut r = ByteReader::new(bytes);
    r.magic(SRFL_MAGIC)?;
    r.version(SRFL_VERSION)?;
    let header_at = r.offset();
    let dims = [r.u32("pair_count")?, r.u32("h")?, r.u32("w")?];
    checked_product(&[dims[0], dims[1], dims[2], 2], header_at)?;
    if dims.contains(&0) {
        return Err(Error::format(header_at, format!("zero dim in {dims:?}")));
    }
    let per = dims[1] as usize * dims[2] as usize;
    let mut pairs = Vec::with_capacity(dims[0] as usize);
    for _ in 0..dims[0] {
        let u = r.f32_vec(per, "u grid")?;
        let v = r.f32_vec(per, "v grid")?;
        pairs.push(FlowPair { u, v });
    }
    r.finish()?;
    FlowField::new(dims[1] as usize, dims[2] as usize, pairs)
}

pub fn write_srfl(path: impl AsRef<Path>, field: &FlowField) -> Result<()> {
    fs::write(path, encode_srfl(field))?;
    Ok(())
}

pub fn read_srfl(path: impl AsRef<Path>) -> Result<FlowField> {
    decode_srfl(&fs::read(path)?)
}
