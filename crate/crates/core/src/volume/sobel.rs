use super::{Axis, Dims3, Volume3};
use crate::error::{Error, Result};

const DERIVATIVE: [f32; 3] = [-1.0, 0.0, 1.0];
const SMOOTHING: [f32; 3] = [1.0, 2.0, 1.0];

/// The 3×3×3 Sobel kernel: derivative taps along one axis, unnormalized
/// (1, 2, 1) smoothing along the other two.
#[derive(Clone, Debug, PartialEq)]
pub struct SobelKernel3 {
    axis: Axis,
    taps: [[[f32; 3]; 3]; 3],
}

impl SobelKernel3 {
    pub fn new(axis: Axis) -> Self {
        let mut taps = [[[0.0; 3]; 3]; 3];
        for (a, plane) in taps.iter_mut().enumerate() {
            for (b, row) in plane.iter_mut().enumerate() {
                for (c, tap) in row.iter_mut().enumerate() {
                    let idx = [a, b, c];
                    *tap = (0..3)
                        .map(|k| {
                            if k == axis.index() {
                                DERIVATIVE[idx[k]]
                            } else {
                                SMOOTHING[idx[k]]
                            }
                        })
                        .product();
                }
            }
        }
        SobelKernel3 { axis, taps }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Tap at offsets `(dt, dh, dw)` with each offset in `0..3`
    /// (1 is the center).
    pub fn tap(&self, dt: usize, dh: usize, dw: usize) -> f32 {
        self.taps[dt][dh][dw]
    }

    pub fn taps(&self) -> &[[[f32; 3]; 3]; 3] {
        &self.taps
    }
}

/// 3D Sobel response along `axis` by cross-correlation with
/// [`SobelKernel3`], using edge-replicate padding at the boundary.
///
/// Evaluated separably: smoothing along the two off-axes, then the central
/// difference along `axis`. The difference step is computed as
/// `next - prev`, so any input that is constant along `axis` yields exact
/// zeros.
pub fn sobel3(v: &Volume3, axis: Axis) -> Result<Volume3> {
    let dims = v.dims();
    if dims.t < 3 || dims.h < 3 || dims.w < 3 {
        return Err(Error::Size(format!(
            "sobel3 needs every dimension >= 3, got {dims}"
        )));
    }
    if axis == Axis::T {
        return Ok(sobel_t(v));
    }
    let mut buf: Vec<f64> = v.data().iter().map(|&x| x as f64).collect();
    for smooth_axis in [Axis::T, Axis::H, Axis::W] {
        if smooth_axis != axis {
            buf = pass(&buf, dims, smooth_axis, |p, c, n| p + 2.0 * c + n);
        }
    }
    let out = pass(&buf, dims, axis, |p, _, n| n - p);
    Ok(Volume3::from_raw(
        dims,
        out.into_iter().map(|x| x as f32).collect(),
    ))
}

/// Temporal case frame by frame: smooth each frame in h and w, then take
/// `S[t+1] - S[t-1]`. Keeps three smoothed frames live.
fn sobel_t(v: &Volume3) -> Volume3 {
    let d = v.dims();
    let plane = d.h * d.w;
    let mut row = vec![0.0f64; plane];
    let mut smooth = |t: usize, dst: &mut Vec<f64>| {
        let src = v.frame(t);
        for (o, s) in row.chunks_exact_mut(d.w).zip(src.chunks_exact(d.w)) {
            let n = d.w;
            o[0] = 3.0 * s[0] as f64 + s[1] as f64;
            for i in 1..n - 1 {
                o[i] = s[i - 1] as f64 + 2.0 * s[i] as f64 + s[i + 1] as f64;
            }
            o[n - 1] = s[n - 2] as f64 + 3.0 * s[n - 1] as f64;
        }
        for y in 0..d.h {
            let (p, c, n) = (y.saturating_sub(1), y, (y + 1).min(d.h - 1));
            let out = &mut dst[y * d.w..(y + 1) * d.w];
            let (rp, rc, rn) = (&row[p * d.w..], &row[c * d.w..], &row[n * d.w..]);
            for x in 0..d.w {
                out[x] = rp[x] + 2.0 * rc[x] + rn[x];
            }
        }
    };
    let mut frames: Vec<Vec<f64>> = (0..3).map(|_| vec![0.0; plane]).collect();
    let mut out = vec![0.0f32; d.len()];
    // frames[k] holds S[t - 1 + k] (clamped).
    smooth(0, &mut frames[1]);
    let (head, rest) = frames.split_at_mut(1);
    head[0].copy_from_slice(&rest[0]);
    smooth(1.min(d.t - 1), &mut frames[2]);
    for t in 0..d.t {
        for (o, (n, p)) in out[t * plane..(t + 1) * plane].iter_mut().zip(frames[2].iter().zip(&frames[0])) {
            *o = (n - p) as f32;
        }
        frames.rotate_left(1);
        if t + 2 < d.t {
            smooth(t + 2, &mut frames[2]);
        } else {
            let (head, rest) = frames.split_at_mut(2);
            rest[0].copy_from_slice(&head[1]);
        }
    }
    Volume3::from_raw(d, out)
}

/// One 3-tap pass along `axis` with clamped neighbours. Intermediates stay
/// in f64 so the result is rounded to f32 once.
fn pass(src: &[f64], dims: Dims3, axis: Axis, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0f64; src.len()];
    if axis == Axis::W {
        for (o, s) in out.chunks_exact_mut(dims.w).zip(src.chunks_exact(dims.w)) {
            let n = dims.w;
            o[0] = f(s[0], s[0], s[1]);
            for i in 1..n - 1 {
                o[i] = f(s[i - 1], s[i], s[i + 1]);
            }
            o[n - 1] = f(s[n - 2], s[n - 1], s[n - 1]);
        }
        return out;
    }
    // Rows of `inner` contiguous values, `extent` of them per block.
    let (extent, inner) = match axis {
        Axis::T => (dims.t, dims.h * dims.w),
        _ => (dims.h, dims.w),
    };
    for (ob, sb) in out.chunks_exact_mut(extent * inner).zip(src.chunks_exact(extent * inner)) {
        for (k, orow) in ob.chunks_exact_mut(inner).enumerate() {
            let row = |j: usize| &sb[j * inner..(j + 1) * inner];
            let (p, c, n) = (row(k.saturating_sub(1)), row(k), row((k + 1).min(extent - 1)));
            for i in 0..inner {
                orow[i] = f(p[i], c[i], n[i]);
            }
        }
    }
    out
}
