//! Direct-loop `f64` forward pass used as a reference for the engine.
#![allow(dead_code, clippy::needless_range_loop)]

use selrel::net::{LayerKind, Model, Tensor};

pub struct Reference {
    input_shape: Vec<usize>,
    layers: Vec<(LayerKind, Vec<f64>, Vec<f64>)>,
}

pub struct RefRun {
    pub logits: Vec<f64>,
    /// Output of every layer, with its shape.
    pub outputs: Vec<(Vec<usize>, Vec<f64>)>,
    /// ReLU open/closed bits and pool winners, in layer order.
    pub pattern: Vec<usize>,
}

fn out_extent(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n + 2 * p - k) / s + 1
}

/// Source index of output position `o`, tap `k`, or `None` in padding.
fn src(o: usize, k: usize, s: usize, p: usize, n: usize) -> Option<usize> {
    let i = (o * s + k) as isize - p as isize;
    (i >= 0 && (i as usize) < n).then_some(i as usize)
}

impl Reference {
    pub fn new(model: &Model) -> Reference {
        let layers = model
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (w, b) = match model.params(i) {
                    Some(p) => (
                        p.weight.data().iter().map(|&v| v as f64).collect(),
                        p.bias.iter().map(|&v| v as f64).collect(),
                    ),
                    None => (Vec::new(), Vec::new()),
                };
                (l.kind.clone(), w, b)
            })
            .collect();
        Reference {
            input_shape: model.input_shape().as_vec(),
            layers,
        }
    }

    pub fn run(&self, x: &[f64]) -> RefRun {
        let mut shape = self.input_shape.clone();
        let mut cur = x.to_vec();
        let mut outputs = Vec::new();
        let mut pattern = Vec::new();
        for (kind, w, b) in &self.layers {
            let (next_shape, next) = match kind {
                LayerKind::Conv3d(spec) => {
                    let (c, t, h, ww) = (shape[0], shape[1], shape[2], shape[3]);
                    let [kt, kh, kw] = spec.kernel;
                    let o_dims: Vec<usize> = (0..3)
                        .map(|i| out_extent([t, h, ww][i], spec.kernel[i], spec.stride[i], spec.padding[i]))
                        .collect();
                    let mut out = Vec::new();
                    for o in 0..spec.out_channels {
                        for ot in 0..o_dims[0] {
                            for oh in 0..o_dims[1] {
                                for ow in 0..o_dims[2] {
                                    let mut acc = b[o];
                                    for ci in 0..c {
                                        for a in 0..kt {
                                            let Some(ti) = src(ot, a, spec.stride[0], spec.padding[0], t) else { continue };
                                            for bb in 0..kh {
                                                let Some(hi) = src(oh, bb, spec.stride[1], spec.padding[1], h) else { continue };
                                                for cc in 0..kw {
                                                    let Some(wi) = src(ow, cc, spec.stride[2], spec.padding[2], ww) else { continue };
                                                    let widx = (((o * c + ci) * kt + a) * kh + bb) * kw + cc;
                                                    acc += w[widx] * cur[((ci * t + ti) * h + hi) * ww + wi];
                                                }
                                            }
                                        }
                                    }
                                    out.push(acc);
                                }
                            }
                        }
                    }
                    (vec![spec.out_channels, o_dims[0], o_dims[1], o_dims[2]], out)
                }
                LayerKind::Relu => {
                    pattern.extend(cur.iter().map(|&v| usize::from(v > 0.0)));
                    (shape.clone(), cur.iter().map(|&v| v.max(0.0)).collect())
                }
                LayerKind::MaxPool3d(spec) => {
                    let (c, t, h, ww) = (shape[0], shape[1], shape[2], shape[3]);
                    let o_dims: Vec<usize> = (0..3)
                        .map(|i| out_extent([t, h, ww][i], spec.window[i], spec.stride[i], spec.padding[i]))
                        .collect();
                    let mut out = Vec::new();
                    for ci in 0..c {
                        for ot in 0..o_dims[0] {
                            for oh in 0..o_dims[1] {
                                for ow in 0..o_dims[2] {
                                    let mut best: Option<(f64, usize)> = None;
                                    for a in 0..spec.window[0] {
                                        let Some(ti) = src(ot, a, spec.stride[0], spec.padding[0], t) else { continue };
                                        for bb in 0..spec.window[1] {
                                            let Some(hi) = src(oh, bb, spec.stride[1], spec.padding[1], h) else { continue };
                                            for cc in 0..spec.window[2] {
                                                let Some(wi) = src(ow, cc, spec.stride[2], spec.padding[2], ww) else { continue };
                                                let idx = ((ci * t + ti) * h + hi) * ww + wi;
                                                if best.is_none_or(|(v, _)| cur[idx] > v) {
                                                    best = Some((cur[idx], idx));
                                                }
                                            }
                                        }
                                    }
                                    let (v, idx) = best.unwrap();
                                    out.push(v);
                                    pattern.push(idx);
                                }
                            }
                        }
                    }
                    (vec![c, o_dims[0], o_dims[1], o_dims[2]], out)
                }
                LayerKind::Flatten => (vec![cur.len()], cur.clone()),
                LayerKind::Dense { out_features } => {
                    let n = cur.len();
                    let out = (0..*out_features)
                        .map(|o| b[o] + (0..n).map(|i| w[o * n + i] * cur[i]).sum::<f64>())
                        .collect();
                    (vec![*out_features], out)
                }
                LayerKind::Gap3d => {
                    let per: usize = shape[1..].iter().product();
                    let out = cur.chunks(per).map(|ch| ch.iter().sum::<f64>() / per as f64).collect();
                    (vec![shape[0]], out)
                }
            };
            shape = next_shape;
            cur = next;
            outputs.push((shape.clone(), cur.clone()));
        }
        RefRun {
            logits: cur,
            outputs,
            pattern,
        }
    }

    pub fn run_tensor(&self, x: &Tensor) -> RefRun {
        self.run(&x.data().iter().map(|&v| v as f64).collect::<Vec<_>>())
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn argmax(v: &[f32]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}
