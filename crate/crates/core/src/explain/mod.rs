//! Baseline explanation backends over a traced forward pass.
//!
//! - [`dtd_explain`]: deep Taylor decomposition (z⁺ rule in hidden layers,
//!   bounded z^B rule at the input layer).
//! - [`gradcam_explain`]: class-gradient-weighted feature map of a conv
//!   layer, rectified and resized to clip geometry.
//! - [`guided_backprop_explain`] and [`guided_gradcam_explain`].
//!
//! All of them collapse the colour channels by summation.

mod backward;
mod dtd;
mod gradcam;

pub use backward::{backward, GradTarget, GradientTensor, ReluMode};
pub use dtd::dtd_explain;
pub use gradcam::{gradcam_explain, gradcam_map, GradCamMap};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::net::{ActivationTrace, Model, Tensor};
use crate::volume::{Dims3, Volume3};

/// Base explanation method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Dtd,
    GradCam,
    GuidedBp,
    GuidedGradCam,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Dtd,
        Method::GradCam,
        Method::GuidedBp,
        Method::GuidedGradCam,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dtd => "dtd",
            Method::GradCam => "gradcam",
            Method::GuidedBp => "guided_bp",
            Method::GuidedGradCam => "guided_gradcam",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Method tag of a relevance volume: a base method, optionally passed
/// through the selective filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MethodTag {
    pub base: Method,
    pub selective: bool,
}

impl MethodTag {
    pub fn base(base: Method) -> Self {
        MethodTag {
            base,
            selective: false,
        }
    }

    pub fn selective(self) -> Self {
        MethodTag {
            selective: true,
            ..self
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.selective {
            write!(f, "selective-{}", self.base)
        } else {
            write!(f, "{}", self.base)
        }
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("selective-") {
            Some(rest) => Ok(MethodTag::base(rest.parse()?).selective()),
            None => Ok(MethodTag::base(s.parse()?)),
        }
    }
}

/// Conditions under which a volume is valid but carries no information.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelevanceFlag {
    /// The target logit was ≤ 0, so relevance propagation has nothing to
    /// distribute; the volume is all zeros.
    NonpositiveSeed,
}

impl RelevanceFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            RelevanceFlag::NonpositiveSeed => "nonpositive-seed",
        }
    }
}

/// A per-voxel relevance map in clip geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceVolume {
    pub volume: Volume3,
    pub method: MethodTag,
    pub class_idx: usize,
    pub flags: Vec<RelevanceFlag>,
}

impl RelevanceVolume {
    pub fn new(volume: Volume3, method: MethodTag, class_idx: usize) -> Self {
        RelevanceVolume {
            volume,
            method,
            class_idx,
            flags: Vec::new(),
        }
    }

    pub fn dims(&self) -> Dims3 {
        self.volume.dims()
    }
}

/// Runs one explainer by name.
pub fn explain(model: &Model, trace: &ActivationTrace, class_idx: usize, method: Method) -> Result<RelevanceVolume> {
    match method {
        Method::Dtd => dtd_explain(model, trace, class_idx),
        Method::GradCam => gradcam_explain(model, trace, class_idx, None),
        Method::GuidedBp => guided_backprop_explain(model, trace, class_idx),
        Method::GuidedGradCam => guided_gradcam_explain(model, trace, class_idx),
    }
}

/// Guided-mode gradient of the class logit with respect to the input,
/// summed over channels. Signed.
pub fn guided_backprop_explain(model: &Model, trace: &ActivationTrace, class_idx: usize) -> Result<RelevanceVolume> {
    let g = backward(model, trace, class_idx, ReluMode::Guided, GradTarget::Input)?;
    Ok(RelevanceVolume::new(
        sum_channels(&g.tensor)?,
        MethodTag::base(Method::GuidedBp),
        class_idx,
    ))
}

/// Hadamard product of the resized GradCAM map and the guided
/// backpropagation volume.
pub fn guided_gradcam_explain(model: &Model, trace: &ActivationTrace, class_idx: usize) -> Result<RelevanceVolume> {
    let cam = gradcam_explain(model, trace, class_idx, None)?;
    let gbp = guided_backprop_explain(model, trace, class_idx)?;
    combine_guided_gradcam(&cam, &gbp)
}

/// The product step of Guided GradCAM, for already-computed parents.
pub fn combine_guided_gradcam(cam: &RelevanceVolume, gbp: &RelevanceVolume) -> Result<RelevanceVolume> {
    let v = cam.volume.zip_with(&gbp.volume, |a, b| a * b)?;
    Ok(RelevanceVolume::new(
        v,
        MethodTag::base(Method::GuidedGradCam),
        cam.class_idx,
    ))
}

/// Collapses a `c × t × h × w` tensor to `t × h × w` by summing channels.
pub fn sum_channels(t: &Tensor) -> Result<Volume3> {
    let [c, tt, h, w] = <[usize; 4]>::try_from(t.shape())
        .map_err(|_| Error::input(format!("expected c×t×h×w tensor, got {:?}", t.shape())))?;
    let per = tt * h * w;
    let mut out = vec![0.0f32; per];
    for ch in t.data().chunks(per).take(c) {
        for (o, v) in out.iter_mut().zip(ch) {
            *o += v;
        }
    }
    Volume3::new(Dims3::new(tt, h, w), out)
}

pub(crate) fn check_trace(model: &Model, trace: &ActivationTrace, class_idx: usize) -> Result<()> {
    if trace.model_id() != model.id() || trace.layer_count() != model.layers().len() {
        return Err(Error::input("trace was not produced by this model"));
    }
    if class_idx >= model.class_count() {
        return Err(Error::input(format!(
            "class {class_idx} out of range (model has {} classes)",
            model.class_count()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for m in Method::ALL {
            let tag = MethodTag::base(m);
            assert_eq!(tag.to_string().parse::<MethodTag>().unwrap(), tag);
            let sel = tag.selective();
            assert_eq!(sel.to_string(), format!("selective-{m}"));
            assert_eq!(sel.to_string().parse::<MethodTag>().unwrap(), sel);
        }
        assert!("lrp".parse::<Method>().is_err());
    }

    #[test]
    fn guided_gradcam_product_and_zero_parent() {
        let d = Dims3::new(2, 2, 2);
        let a = Volume3::from_fn(d, |t, h, w| (t + h + w) as f32).unwrap();
        let b = Volume3::from_fn(d, |t, h, w| t as f32 - h as f32 * 0.5 + w as f32).unwrap();
        let cam = RelevanceVolume::new(a.clone(), MethodTag::base(Method::GradCam), 1);
        let gbp = RelevanceVolume::new(b.clone(), MethodTag::base(Method::GuidedBp), 1);
        let out = combine_guided_gradcam(&cam, &gbp).unwrap();
        for i in 0..8 {
            assert_eq!(out.volume.data()[i], a.data()[i] * b.data()[i]);
            let nz = out.volume.data()[i] != 0.0;
            assert_eq!(nz, a.data()[i] != 0.0 && b.data()[i] != 0.0);
        }
        let zero = RelevanceVolume::new(Volume3::zeros(d), MethodTag::base(Method::GuidedBp), 1);
        let out = combine_guided_gradcam(&cam, &zero).unwrap();
        assert!(out.volume.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_sum() {
        let t = Tensor::new(vec![2, 1, 1, 2], vec![1.0, 2.0, 10.0, 20.0]).unwrap();
        assert_eq!(sum_channels(&t).unwrap().data(), &[11.0, 22.0]);
    }
}
