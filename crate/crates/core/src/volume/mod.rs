//! Dense `t × h × w` scalar volumes.
//!
//! A [`Volume3`] carries relevance maps, temporal edge maps, binary masks and
//! flow magnitudes. Data is row-major with the frame axis outermost.

mod io;
mod resize;
mod sobel;

pub use io::{decode_srvl, encode_srvl, read_srvl, write_srvl, SRVL_MAGIC, SRVL_VERSION};
pub use resize::trilinear_resize;
pub use sobel::{sobel3, SobelKernel3};

use std::fmt;

use crate::error::{Error, Result};

/// One of the three volume axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    T,
    H,
    W,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::T => 0,
            Axis::H => 1,
            Axis::W => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::T => "t",
            Axis::H => "h",
            Axis::W => "w",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(Axis::T),
            "h" => Ok(Axis::H),
            "w" => Ok(Axis::W),
            other => Err(Error::input(format!("unknown axis `{other}`"))),
        }
    }
}

/// Volume extents as `(t, h, w)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims3 {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims3 {
    pub const fn new(t: usize, h: usize, w: usize) -> Self {
        Dims3 { t, h, w }
    }

    pub fn len(&self) -> usize {
        self.t * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.t, self.h, self.w]
    }

    #[inline]
    pub fn offset(&self, t: usize, h: usize, w: usize) -> usize {
        (t * self.h + h) * self.w + w
    }
}

impl fmt::Display for Dims3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.t, self.h, self.w)
    }
}

/// A dense grid of finite `f32` scalars over `(t, h, w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume3 {
    dims: Dims3,
    data: Vec<f32>,
}

impl Volume3 {
    /// Builds a volume, checking the length and that every value is finite.
    pub fn new(dims: Dims3, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Size(format!("volume dims {dims} contain a zero")));
        }
        if data.len() != dims.len() {
            return Err(Error::Size(format!(
                "volume {dims} needs {} scalars, got {}",
                dims.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite value at index {i}")));
        }
        Ok(Volume3 { dims, data })
    }

    pub fn zeros(dims: Dims3) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: Dims3, value: f32) -> Self {
        assert!(!dims.is_empty(), "volume dims {dims} contain a zero");
        assert!(value.is_finite());
        Volume3 {
            dims,
            data: vec![value; dims.len()],
        }
    }

    /// Builds a volume by evaluating `f(t, h, w)` at every voxel.
    pub fn from_fn(dims: Dims3, mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len());
        for t in 0..dims.t {
            for h in 0..dims.h {
                for w in 0..dims.w {
                    data.push(f(t, h, w));
                }
            }
        }
        Self::new(dims, data)
    }

    /// Internal constructor for kernels whose arithmetic cannot leave the
    /// finite range of their finite inputs.
    pub(crate) fn from_raw(dims: Dims3, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Volume3 { dims, data }
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, t: usize, h: usize, w: usize) -> f32 {
        self.data[self.dims.offset(t, h, w)]
    }

    /// The `h × w` slice for frame `t`.
    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.dims.h * self.dims.w;
        &self.data[t * n..(t + 1) * n]
    }

    /// Applies `f` element-wise. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Volume3 {
        let data: Vec<f32> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()), "map produced non-finite");
        Volume3 {
            dims: self.dims,
            data,
        }
    }

    /// Combines two equally-shaped volumes element-wise.
    pub fn zip_with(&self, other: &Volume3, f: impl Fn(f32, f32) -> f32) -> Result<Volume3> {
        self.expect_dims(other.dims, "zip_with")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Volume3::new(self.dims, data)
    }

    pub fn scale(&self, factor: f32) -> Volume3 {
        self.map(|v| v * factor)
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn stats(&self) -> VolumeStats {
        volume_stats(self)
    }

    pub(crate) fn expect_dims(&self, dims: Dims3, what: &str) -> Result<()> {
        if self.dims != dims {
            return Err(Error::input(format!(
                "{what}: dims {} do not match {}",
                self.dims, dims
            )));
        }
        Ok(())
    }
}

/// Population statistics of a volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub sum: f64,
}

/// Mean, population standard deviation, extrema and sum, accumulated in
/// f64. The variance is a second pass over deviations from the mean.
pub fn volume_stats(v: &Volume3) -> VolumeStats {
    const LANES: usize = 8;
    let mut sum = [0.0f64; LANES];
    let mut min = [f32::INFINITY; LANES];
    let mut max = [f32::NEG_INFINITY; LANES];
    let chunks = v.data.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for k in 0..LANES {
            sum[k] += c[k] as f64;
            min[k] = min[k].min(c[k]);
            max[k] = max[k].max(c[k]);
        }
    }
    for (k, &x) in tail.iter().enumerate() {
        sum[k] += x as f64;
        min[k] = min[k].min(x);
        max[k] = max[k].max(x);
    }
    let total: f64 = sum.iter().sum();
    let min = min.iter().fold(f32::INFINITY, |a, &b| a.min(b)) as f64;
    let max = max.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
    let n = v.data.len() as f64;
    let mut mean = total / n;

    let mut sq = [0.0f64; LANES];
    let chunks = v.data.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for k in 0..LANES {
            let d = c[k] as f64 - mean;
            sq[k] += d * d;
        }
    }
    for (k, &x) in tail.iter().enumerate() {
        let d = x as f64 - mean;
        sq[k] += d * d;
    }
    let mut std = (sq.iter().sum::<f64>() / n).sqrt();
    // Rounding in the mean can leave a residue on constant input.
    if min == max {
        mean = min;
        std = 0.0;
    }
    VolumeStats {
        mean: mean.clamp(min, max),
        std,
        min,
        max,
        sum: total,
    }
}
