//! Deep Taylor decomposition.
//!
//! Relevance starts as the target logit and flows backwards:
//!
//! - conv3d / dense in hidden layers: z⁺ rule,
//!   `R_i = x_i · Σ_j w⁺_ij R_j / (Σ_i' x_i' w⁺_i'j + ε)` with `x ≥ 0`.
//! - conv3d / dense reading the model input: z^B rule with per-channel
//!   pixel bounds `l = −mean`, `h = 255 − mean`, written as
//!   `(x − l)·w⁺ + (x − h)·w⁻` so each term is nonnegative.
//! - max-pool: winner takes all; ReLU and flatten: identity; GAP: z⁺ with
//!   uniform weights.
//!
//! Biases never enter the denominators, so relevance is conserved up to
//! dead units.

use super::{check_trace, sum_channels, Method, MethodTag, RelevanceFlag, RelevanceVolume};
use crate::error::Result;
use crate::net::{ops, ActivationTrace, ConvSpec, LayerKind, Model, Tensor};
use crate::volume::{Dims3, Volume3};

const EPS: f32 = 1e-9;

pub fn dtd_explain(model: &Model, trace: &ActivationTrace, class_idx: usize) -> Result<RelevanceVolume> {
    check_trace(model, trace, class_idx)?;
    let input = model.input_shape();
    let dims = Dims3::new(input.t, input.h, input.w);
    let seed = trace.logits()[class_idx];
    if seed <= 0.0 {
        let mut r = RelevanceVolume::new(Volume3::zeros(dims), MethodTag::base(Method::Dtd), class_idx);
        r.flags.push(RelevanceFlag::NonpositiveSeed);
        return Ok(r);
    }
    let n = model.layers().len();
    let mut rel = Tensor::zeros(model.output_shape_of(n - 1).to_vec());
    rel.data_mut()[class_idx] = seed;
    for i in (0..n).rev() {
        rel = propagate(model, trace, i, rel);
    }
    Ok(RelevanceVolume::new(
        sum_channels(&rel)?,
        MethodTag::base(Method::Dtd),
        class_idx,
    ))
}

/// `R / (z + ε)` element-wise; `z ≥ 0` for both rules.
fn stabilized_ratio(rel: &Tensor, z: &[f32]) -> Tensor {
    rel.map_with(z, |r, zv| if r == 0.0 { 0.0 } else { r / (zv + EPS) })
}

fn positive(w: &[f32]) -> Vec<f32> {
    w.iter().map(|v| v.max(0.0)).collect()
}

fn negative(w: &[f32]) -> Vec<f32> {
    w.iter().map(|v| v.min(0.0)).collect()
}

/// Per-element lower and upper input bounds, from the model means.
/// Channel `c` uses mean `c % 3`.
fn input_bounds(model: &Model, shape: &[usize]) -> (Tensor, Tensor) {
    let means = model.means();
    let per: usize = shape[1..].iter().product();
    let mut low = Vec::with_capacity(per * shape[0]);
    let mut high = Vec::with_capacity(per * shape[0]);
    for c in 0..shape[0] {
        let m = means[c % 3];
        low.extend(std::iter::repeat_n(-m, per));
        high.extend(std::iter::repeat_n(255.0 - m, per));
    }
    (
        Tensor::new(shape.to_vec(), low).expect("bounds shape"),
        Tensor::new(shape.to_vec(), high).expect("bounds shape"),
    )
}

/// A linear map `x ↦ W·x` (conv3d or dense) and its adjoint.
enum Linear<'a> {
    Conv(&'a ConvSpec),
    Dense(usize),
}

impl Linear<'_> {
    fn apply(&self, x: &Tensor, w: &[f32], out_shape: &[usize]) -> Vec<f32> {
        match self {
            Linear::Conv(spec) => ops::conv3d(x, w, None, spec, out_shape).into_data(),
            Linear::Dense(out) => ops::dense(x.data(), w, None, *out),
        }
    }

    fn adjoint(&self, s: &Tensor, w: &[f32], in_shape: &[usize]) -> Vec<f32> {
        match self {
            Linear::Conv(spec) => ops::conv3d_transpose(s, w, spec, in_shape).into_data(),
            Linear::Dense(_) => ops::dense_transpose(s.data(), w, in_shape.iter().product()),
        }
    }
}

fn propagate(model: &Model, trace: &ActivationTrace, i: usize, rel: Tensor) -> Tensor {
    let in_shape = model.input_shape_of(i).to_vec();
    let out_shape = model.output_shape_of(i).to_vec();
    let x = trace.layer_input(i);
    let linear = match &model.layers()[i].kind {
        LayerKind::Conv3d(spec) => Linear::Conv(spec),
        LayerKind::Dense { out_features } => Linear::Dense(*out_features),
        LayerKind::Relu => return rel,
        LayerKind::Flatten => return rel.reshape(in_shape).expect("flatten shape"),
        LayerKind::MaxPool3d(_) => {
            let arg = trace.pool_argmax(i).expect("pool argmax traced");
            return ops::unpool(&rel, arg, &in_shape);
        }
        LayerKind::Gap3d => {
            let xp = x.map(|v| v.max(0.0));
            let per: usize = in_shape[1..].iter().product();
            let mut out = Vec::with_capacity(xp.len());
            for (ch, &r) in xp.data().chunks(per).zip(rel.data()) {
                let z: f32 = ch.iter().sum();
                let s = if r == 0.0 { 0.0 } else { r / (z + EPS) };
                out.extend(ch.iter().map(|&v| v * s));
            }
            return Tensor::new(in_shape, out).expect("gap shape");
        }
    };
    let w = model.params(i).expect("params").weight.data();
    let wp = positive(w);
    if i == 0 {
        // z^B: clamp into the pixel box so both factors keep their sign.
        let (low, high) = input_bounds(model, &in_shape);
        let xc = x.map_with(low.data(), f32::max).map_with(high.data(), f32::min);
        let from_low = xc.map_with(low.data(), |v, l| v - l);
        let from_high = xc.map_with(high.data(), |v, h| v - h);
        let wn = negative(w);
        let z: Vec<f32> = linear
            .apply(&from_low, &wp, &out_shape)
            .iter()
            .zip(linear.apply(&from_high, &wn, &out_shape))
            .map(|(a, b)| a + b)
            .collect();
        let s = stabilized_ratio(&rel, &z);
        let cp = linear.adjoint(&s, &wp, &in_shape);
        let cn = linear.adjoint(&s, &wn, &in_shape);
        let out = (0..xc.len())
            .map(|k| from_low.data()[k] * cp[k] + from_high.data()[k] * cn[k])
            .collect();
        Tensor::new(in_shape, out).expect("input relevance shape")
    } else {
        let xp = x.map(|v| v.max(0.0));
        let z = linear.apply(&xp, &wp, &out_shape);
        let s = stabilized_ratio(&rel, &z);
        let c = linear.adjoint(&s, &wp, &in_shape);
        xp.map_with(&c, |a, b| a * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Architecture, WeightBundle};

    fn model(text: &str, params: &[(&str, Vec<usize>, Vec<f32>)]) -> Model {
        let mut b = WeightBundle::new();
        for (name, shape, data) in params {
            b.insert(*name, Tensor::new(shape.clone(), data.clone()).unwrap());
        }
        Model::load(Architecture::parse(text).unwrap(), &b).unwrap()
    }

    #[test]
    fn single_dense_hand_computation() {
        // Output 2·1 + 1·1 = 3; with a zero lower bound z^B reduces to z⁺:
        // R = (1·2/3·3, 1·1/3·3) = (2, 1).
        let m = model(
            "input channels=1 t=1 h=1 w=2 means=0,0,0\ndense name=fc out=1\n",
            &[("fc.weight", vec![1, 2], vec![2.0, 1.0]), ("fc.bias", vec![1], vec![0.0])],
        );
        let (y, trace) = m.forward_tensor(Tensor::new(vec![1, 1, 1, 2], vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(y, vec![3.0]);
        let r = dtd_explain(&m, &trace, 0).unwrap();
        assert!((r.volume.data()[0] - 2.0).abs() < 1e-6);
        assert!((r.volume.data()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_active_path_gets_all_relevance() {
        // Identity-like positive weights; only input 1 is nonzero (with a
        // zero lower bound), so the whole logit lands on it.
        let m = model(
            "input channels=1 t=1 h=1 w=3 means=0,0,0\ndense name=a out=3\nrelu\ndense name=b out=1\n",
            &[
                ("a.weight", vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]),
                ("a.bias", vec![3], vec![0.0; 3]),
                ("b.weight", vec![1, 3], vec![1.0, 1.0, 1.0]),
                ("b.bias", vec![1], vec![0.0]),
            ],
        );
        let (y, trace) = m.forward_tensor(Tensor::new(vec![1, 1, 1, 3], vec![0.0, 4.0, 0.0]).unwrap()).unwrap();
        let r = dtd_explain(&m, &trace, 0).unwrap();
        assert_eq!(r.volume.data()[0], 0.0);
        assert!((r.volume.data()[1] - y[0]).abs() < 1e-6);
        assert_eq!(r.volume.data()[2], 0.0);
    }

    #[test]
    fn nonpositive_seed_is_flagged() {
        let m = model(
            "input channels=1 t=1 h=1 w=2\ndense name=fc out=1\n",
            &[("fc.weight", vec![1, 2], vec![-1.0, -1.0]), ("fc.bias", vec![1], vec![0.0])],
        );
        let (_, trace) = m.forward_tensor(Tensor::new(vec![1, 1, 1, 2], vec![1.0, 1.0]).unwrap()).unwrap();
        let r = dtd_explain(&m, &trace, 0).unwrap();
        assert_eq!(r.flags, vec![RelevanceFlag::NonpositiveSeed]);
        assert!(r.volume.data().iter().all(|&v| v == 0.0));
    }
}
