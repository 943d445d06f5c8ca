//! Minimal 3D-CNN inference: architecture text, SRWB weights,
//! preprocessing and forward passes that keep every activation for the
//! explainers.

pub mod arch;
pub mod layer;
mod model;
pub mod ops;
pub mod preprocess;
mod tensor;
pub mod weights;

pub use arch::{Architecture, InputShape, DEFAULT_MEANS};
pub use layer::{ConvSpec, LayerKind, LayerSpec, PoolSpec};
pub use model::{ActivationTrace, Model, Params};
pub use preprocess::{
    frames_to_clip, prepare_frames, preprocess_clip, preprocess_window, window_indices,
    ClipGeometry, ClipTensor,
};
pub use tensor::Tensor;
pub use weights::WeightBundle;

use std::path::Path;

use crate::error::Result;

/// Loads a preset name or architecture file together with an SRWB bundle.
pub fn load_model(arch_source: &str, weight_bundle: impl AsRef<Path>) -> Result<Model> {
    Model::from_files(arch_source, weight_bundle)
}

pub fn forward(model: &Model, clip: &ClipTensor) -> Result<(Vec<f32>, ActivationTrace)> {
    model.forward(clip)
}
