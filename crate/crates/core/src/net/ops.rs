//! Numeric kernels for the layer types, plus the transposed (backward)
//! maps the explainers need.
//!
//! Convolution lowers each output frame to a matrix product
//! (`im2col` + sgemm). Parallel work is split by frame or channel and every
//! reduction runs in a fixed order, so results do not depend on the number
//! of worker threads.

use rayon::prelude::*;

use super::layer::{ConvSpec, PoolSpec};
use super::Tensor;

/// Upper bound on the floats held by concurrently-live column buffers in
/// the transposed convolution.
const COL_BUDGET: usize = 1 << 24;

struct ConvGeom {
    c: usize,
    t: usize,
    h: usize,
    w: usize,
    to: usize,
    ho: usize,
    wo: usize,
    k: [usize; 3],
    s: [usize; 3],
    p: [usize; 3],
}

impl ConvGeom {
    fn new(in_shape: &[usize], out_shape: &[usize], k: [usize; 3], s: [usize; 3], p: [usize; 3]) -> Self {
        ConvGeom {
            c: in_shape[0],
            t: in_shape[1],
            h: in_shape[2],
            w: in_shape[3],
            to: out_shape[1],
            ho: out_shape[2],
            wo: out_shape[3],
            k,
            s,
            p,
        }
    }

    fn rows(&self) -> usize {
        self.c * self.k[0] * self.k[1] * self.k[2]
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }

    /// Input coordinate for output position `o` and tap `d` on one axis.
    #[inline]
    fn src(o: usize, d: usize, s: usize, p: usize, n: usize) -> Option<usize> {
        let x = (o * s + d) as isize - p as isize;
        (x >= 0 && (x as usize) < n).then_some(x as usize)
    }

    /// Visits `(row, col, input offset)` for every in-bounds tap of frame `to`.
    fn for_each_tap(&self, to: usize, mut f: impl FnMut(usize, usize, usize)) {
        let [kt, kh, kw] = self.k;
        for ci in 0..self.c {
            for dt in 0..kt {
                let Some(ti) = Self::src(to, dt, self.s[0], self.p[0], self.t) else {
                    continue;
                };
                for dh in 0..kh {
                    for dw in 0..kw {
                        let row = ((ci * kt + dt) * kh + dh) * kw + dw;
                        for ho in 0..self.ho {
                            let Some(hi) = Self::src(ho, dh, self.s[1], self.p[1], self.h) else {
                                continue;
                            };
                            let base = ((ci * self.t + ti) * self.h + hi) * self.w;
                            for wo in 0..self.wo {
                                if let Some(wi) = Self::src(wo, dw, self.s[2], self.p[2], self.w) {
                                    f(row, ho * self.wo + wo, base + wi);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `C = A·B` for row-major operands given by element strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    c: &mut [f32],
) {
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert_eq!(c.len(), m * n);
    // SAFETY: the asserts above bound every strided access inside the
    // slices; `c` is exclusively borrowed and does not alias `a` or `b`.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// 3D cross-correlation with zero padding. `weight` is `out × in × kt × kh × kw`.
pub fn conv3d(input: &Tensor, weight: &[f32], bias: Option<&[f32]>, spec: &ConvSpec, out_shape: &[usize]) -> Tensor {
    let g = ConvGeom::new(input.shape(), out_shape, spec.kernel, spec.stride, spec.padding);
    let (m, k, n) = (spec.out_channels, g.rows(), g.cols());
    debug_assert_eq!(weight.len(), m * k);
    let x = input.data();
    let frames: Vec<Vec<f32>> = (0..g.to)
        .into_par_iter()
        .map(|to| {
            let mut col = vec![0.0f32; k * n];
            g.for_each_tap(to, |row, c, src| col[row * n + c] = x[src]);
            let mut out = vec![0.0f32; m * n];
            gemm(m, k, n, weight, (k, 1), &col, (n, 1), &mut out);
            out
        })
        .collect();
    let mut out = vec![0.0f32; m * g.to * n];
    for (to, frame) in frames.iter().enumerate() {
        for o in 0..m {
            let b = bias.map_or(0.0, |b| b[o]);
            let dst = &mut out[(o * g.to + to) * n..][..n];
            for (d, s) in dst.iter_mut().zip(&frame[o * n..(o + 1) * n]) {
                *d = s + b;
            }
        }
    }
    Tensor::new(out_shape.to_vec(), out).expect("conv output shape")
}

/// Adjoint of [`conv3d`] (without bias) with respect to its input.
pub fn conv3d_transpose(grad_out: &Tensor, weight: &[f32], spec: &ConvSpec, in_shape: &[usize]) -> Tensor {
    let g = ConvGeom::new(in_shape, grad_out.shape(), spec.kernel, spec.stride, spec.padding);
    let (m, k, n) = (spec.out_channels, g.rows(), g.cols());
    let go = grad_out.data();
    let mut grad_in = vec![0.0f32; in_shape.iter().product()];
    let batch = (COL_BUDGET / (k * n).max(1)).max(1);
    let frames: Vec<usize> = (0..g.to).collect();
    for chunk in frames.chunks(batch) {
        let cols: Vec<Vec<f32>> = chunk
            .par_iter()
            .map(|&to| {
                let mut col = vec![0.0f32; k * n];
                gemm(k, m, n, weight, (1, k), &go[to * n..], (g.to * n, 1), &mut col);
                col
            })
            .collect();
        for (&to, col) in chunk.iter().zip(&cols) {
            g.for_each_tap(to, |row, c, dst| grad_in[dst] += col[row * n + c]);
        }
    }
    Tensor::new(in_shape.to_vec(), grad_in).expect("conv input shape")
}

/// Max pooling; returns the output and, per output element, the flat input
/// index of the winner. Ties go to the first candidate in row-major window
/// order; padded positions never win.
pub fn maxpool3d(input: &Tensor, spec: &PoolSpec, out_shape: &[usize]) -> (Tensor, Vec<u32>) {
    let [c, t, h, w] = <[usize; 4]>::try_from(input.shape()).expect("pool input rank");
    let (to_n, ho_n, wo_n) = (out_shape[1], out_shape[2], out_shape[3]);
    let per_channel = to_n * ho_n * wo_n;
    let x = input.data();
    let results: Vec<(Vec<f32>, Vec<u32>)> = (0..c)
        .into_par_iter()
        .map(|ci| {
            let mut vals = Vec::with_capacity(per_channel);
            let mut idxs = Vec::with_capacity(per_channel);
            for to in 0..to_n {
                for ho in 0..ho_n {
                    for wo in 0..wo_n {
                        let mut best = f32::NEG_INFINITY;
                        let mut arg = usize::MAX;
                        for dt in 0..spec.window[0] {
                            let Some(ti) = ConvGeom::src(to, dt, spec.stride[0], spec.padding[0], t) else {
                                continue;
                            };
                            for dh in 0..spec.window[1] {
                                let Some(hi) = ConvGeom::src(ho, dh, spec.stride[1], spec.padding[1], h) else {
                                    continue;
                                };
                                for dw in 0..spec.window[2] {
                                    let Some(wi) = ConvGeom::src(wo, dw, spec.stride[2], spec.padding[2], w) else {
                                        continue;
                                    };
                                    let idx = ((ci * t + ti) * h + hi) * w + wi;
                                    if arg == usize::MAX || x[idx] > best {
                                        best = x[idx];
                                        arg = idx;
                                    }
                                }
                            }
                        }
                        debug_assert!(arg != usize::MAX, "window lies entirely in padding");
                        vals.push(best);
                        idxs.push(arg as u32);
                    }
                }
            }
            (vals, idxs)
        })
        .collect();
    let mut out = Vec::with_capacity(c * per_channel);
    let mut arg = Vec::with_capacity(c * per_channel);
    for (v, i) in results {
        out.extend(v);
        arg.extend(i);
    }
    (Tensor::new(out_shape.to_vec(), out).expect("pool output shape"), arg)
}

/// Routes each output value back to its traced winner, accumulating when
/// windows overlap.
pub fn unpool(values: &Tensor, argmax: &[u32], in_shape: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(in_shape.to_vec());
    let o = out.data_mut();
    for (&v, &i) in values.data().iter().zip(argmax) {
        o[i as usize] += v;
    }
    out
}

/// `y = W·x + b` with `W` of shape `out × in`.
pub fn dense(x: &[f32], weight: &[f32], bias: Option<&[f32]>, out_features: usize) -> Vec<f32> {
    let n_in = x.len();
    weight
        .par_chunks(n_in)
        .take(out_features)
        .enumerate()
        .map(|(o, row)| {
            let dot: f32 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            dot + bias.map_or(0.0, |b| b[o])
        })
        .collect()
}

/// `Wᵀ·g` for `W` of shape `out × in`.
pub fn dense_transpose(g: &[f32], weight: &[f32], in_features: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; in_features];
    for (row, &go) in weight.chunks(in_features).zip(g) {
        if go == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(row) {
            *o += w * go;
        }
    }
    out
}

/// Per-channel mean over all `(t, h, w)` positions.
pub fn gap3d(input: &Tensor) -> Tensor {
    let c = input.shape()[0];
    let per = input.len() / c;
    let data = input
        .data()
        .chunks(per)
        .map(|ch| (ch.iter().map(|&v| v as f64).sum::<f64>() / per as f64) as f32)
        .collect();
    Tensor::new(vec![c], data).expect("gap shape")
}

pub fn gap3d_transpose(g: &[f32], in_shape: &[usize]) -> Tensor {
    let per: usize = in_shape[1..].iter().product();
    let data = g
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v / per as f32, per))
        .collect();
    Tensor::new(in_shape.to_vec(), data).expect("gap input shape")
}
