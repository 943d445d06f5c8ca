use super::{backward, check_trace, GradTarget, Method, MethodTag, ReluMode, RelevanceVolume};
use crate::error::{Error, Result};
use crate::net::{ActivationTrace, LayerKind, Model};
use crate::volume::{trilinear_resize, Dims3, Volume3};

/// GradCAM before and after resizing to clip geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCamMap {
    /// Name of the conv layer whose feature map was weighted.
    pub layer: String,
    /// Per-channel weights (mean gradient over the feature map).
    pub channel_weights: Vec<f32>,
    /// Rectified map at feature-map resolution.
    pub raw: Volume3,
    pub resized: Volume3,
}

/// Index of the activation GradCAM reads for conv layer `conv`: the conv
/// output itself, or the ReLU output when a ReLU follows directly.
fn feature_index(model: &Model, conv: usize) -> usize {
    match model.layers().get(conv + 1) {
        Some(l) if l.kind == LayerKind::Relu => conv + 1,
        _ => conv,
    }
}

/// Resolves `target` (default: the last conv3d layer).
fn target_conv(model: &Model, target: Option<&str>) -> Result<usize> {
    match target {
        Some(name) => {
            let i = model
                .layer_index(name)
                .ok_or_else(|| Error::input(format!("no layer named `{name}`")))?;
            match model.layers()[i].kind {
                LayerKind::Conv3d(_) => Ok(i),
                _ => Err(Error::input(format!("GradCAM target `{name}` is not a conv3d layer"))),
            }
        }
        None => model
            .layers()
            .iter()
            .rposition(|l| matches!(l.kind, LayerKind::Conv3d(_)))
            .ok_or_else(|| Error::input("model has no conv3d layer for GradCAM")),
    }
}

pub fn gradcam_map(model: &Model, trace: &ActivationTrace, class_idx: usize, target: Option<&str>) -> Result<GradCamMap> {
    check_trace(model, trace, class_idx)?;
    let conv = target_conv(model, target)?;
    let feat = feature_index(model, conv);
    let grad = backward(model, trace, class_idx, ReluMode::Standard, GradTarget::LayerOutput(feat))?;
    let act = trace.layer_output(feat);
    let [c, t, h, w] = <[usize; 4]>::try_from(act.shape()).expect("conv activation rank");
    let per = t * h * w;
    let weights: Vec<f32> = grad
        .tensor
        .data()
        .chunks(per)
        .map(|g| (g.iter().map(|&v| v as f64).sum::<f64>() / per as f64) as f32)
        .collect();
    let mut map = vec![0.0f64; per];
    for (ch, &a) in act.data().chunks(per).take(c).zip(&weights) {
        for (m, &v) in map.iter_mut().zip(ch) {
            *m += a as f64 * v as f64;
        }
    }
    let raw = Volume3::new(
        Dims3::new(t, h, w),
        map.into_iter().map(|v| v.max(0.0) as f32).collect(),
    )?;
    let input = model.input_shape();
    let resized = trilinear_resize(&raw, Dims3::new(input.t, input.h, input.w))?;
    Ok(GradCamMap {
        layer: model.layers()[conv].name.clone(),
        channel_weights: weights,
        raw,
        resized,
    })
}

/// GradCAM at `target` (default: last conv layer), resized to clip
/// geometry. Element-wise ≥ 0.
pub fn gradcam_explain(
    model: &Model,
    trace: &ActivationTrace,
    class_idx: usize,
    target: Option<&str>,
) -> Result<RelevanceVolume> {
    let map = gradcam_map(model, trace, class_idx, target)?;
    Ok(RelevanceVolume::new(
        map.resized,
        MethodTag::base(Method::GradCam),
        class_idx,
    ))
}
