use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use super::arch::{Architecture, InputShape};
use super::layer::{LayerKind, LayerSpec};
use super::ops;
use super::preprocess::ClipTensor;
use super::weights::WeightBundle;
use super::Tensor;
use crate::error::{Error, Result};

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

/// Weights and bias of a conv3d or dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

/// A validated layer graph with loaded weights.
#[derive(Debug)]
pub struct Model {
    id: u64,
    arch: Architecture,
    params: Vec<Option<Params>>,
    /// `shapes[0]` is the input; `shapes[i + 1]` is the output of layer `i`.
    shapes: Vec<Vec<usize>>,
}

impl Model {
    /// Checks the bundle against the architecture and runs shape inference.
    pub fn load(arch: Architecture, bundle: &WeightBundle) -> Result<Model> {
        let mut shapes = vec![arch.input.as_vec()];
        let mut params = Vec::with_capacity(arch.layers.len());
        let mut used = Vec::new();
        for layer in &arch.layers {
            let input = shapes.last().expect("nonempty");
            let out = layer.output_shape(input)?;
            let p = match layer.param_shapes(input) {
                Some((wshape, bshape)) => {
                    let weight = take_param(bundle, layer, "weight", &wshape)?;
                    let bias = take_param(bundle, layer, "bias", &bshape)?;
                    used.push(format!("{}.weight", layer.name));
                    used.push(format!("{}.bias", layer.name));
                    Some(Params {
                        weight,
                        bias: bias.into_data(),
                    })
                }
                None => None,
            };
            params.push(p);
            shapes.push(out);
        }
        if let Some(extra) = bundle.names().find(|n| !used.iter().any(|u| u == n)) {
            let layer = extra.split('.').next().unwrap_or(extra);
            return Err(Error::load(layer, format!("unexpected parameter `{extra}`")));
        }
        let last = shapes.last().expect("nonempty");
        if last.len() != 1 {
            let name = &arch.layers.last().expect("nonempty").name;
            return Err(Error::load(name, format!("model output must be a vector, got {last:?}")));
        }
        Ok(Model {
            id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed),
            arch,
            params,
            shapes,
        })
    }

    /// Loads from a preset name (e.g. `c3d-101`) or an architecture file,
    /// plus an SRWB bundle.
    pub fn from_files(arch_source: &str, weights: impl AsRef<Path>) -> Result<Model> {
        let arch = match Architecture::preset(arch_source) {
            Some(a) => a,
            None => Architecture::parse(&std::fs::read_to_string(arch_source)?)?,
        };
        Model::load(arch, &WeightBundle::read(weights)?)
    }

    pub(crate) fn id(&self) -> u64 {
        self.id
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.arch.layers
    }

    pub fn input_shape(&self) -> InputShape {
        self.arch.input
    }

    pub fn means(&self) -> [f32; 3] {
        self.arch.means
    }

    /// Overrides the preprocessing means (which also bound the input-layer
    /// relevance rule).
    pub fn set_means(&mut self, means: [f32; 3]) {
        self.arch.means = means;
    }

    pub fn class_count(&self) -> usize {
        self.shapes.last().expect("nonempty")[0]
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.arch.layers.iter().position(|l| l.name == name)
    }

    pub fn input_shape_of(&self, layer: usize) -> &[usize] {
        &self.shapes[layer]
    }

    pub fn output_shape_of(&self, layer: usize) -> &[usize] {
        &self.shapes[layer + 1]
    }

    pub fn params(&self, layer: usize) -> Option<&Params> {
        self.params[layer].as_ref()
    }

    /// Runs a preprocessed clip through the network.
    pub fn forward(&self, clip: &ClipTensor) -> Result<(Vec<f32>, ActivationTrace)> {
        self.forward_tensor(clip.to_tensor())
    }

    /// Runs an input tensor of shape `channels × t × h × w`.
    pub fn forward_tensor(&self, input: Tensor) -> Result<(Vec<f32>, ActivationTrace)> {
        if input.shape() != self.shapes[0].as_slice() {
            return Err(Error::input(format!(
                "input shape {:?} does not match model input {:?}",
                input.shape(),
                self.shapes[0]
            )));
        }
        if input.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::input("input contains non-finite values"));
        }
        let mut activations = Vec::with_capacity(self.shapes.len());
        let mut argmax = Vec::with_capacity(self.arch.layers.len());
        activations.push(input);
        for (i, layer) in self.arch.layers.iter().enumerate() {
            let x = activations.last().expect("nonempty");
            let out_shape = &self.shapes[i + 1];
            let mut pool_idx = None;
            let y = match &layer.kind {
                LayerKind::Conv3d(spec) => {
                    let p = self.params[i].as_ref().expect("conv params");
                    ops::conv3d(x, p.weight.data(), Some(&p.bias), spec, out_shape)
                }
                LayerKind::Relu => x.map(|v| v.max(0.0)),
                LayerKind::MaxPool3d(spec) => {
                    let (y, idx) = ops::maxpool3d(x, spec, out_shape);
                    pool_idx = Some(idx);
                    y
                }
                LayerKind::Flatten => x.clone().reshape(out_shape.clone())?,
                LayerKind::Dense { out_features } => {
                    let p = self.params[i].as_ref().expect("dense params");
                    let y = ops::dense(x.data(), p.weight.data(), Some(&p.bias), *out_features);
                    Tensor::new(out_shape.clone(), y)?
                }
                LayerKind::Gap3d => ops::gap3d(x),
            };
            debug_assert_eq!(y.shape(), out_shape.as_slice());
            if y.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "layer `{}` produced non-finite activations",
                    layer.name
                )));
            }
            activations.push(y);
            argmax.push(pool_idx);
        }
        let logits = activations.last().expect("nonempty").data().to_vec();
        Ok((
            logits,
            ActivationTrace {
                model_id: self.id,
                activations,
                argmax,
            },
        ))
    }
}

fn take_param(bundle: &WeightBundle, layer: &LayerSpec, part: &str, shape: &[usize]) -> Result<Tensor> {
    let key = format!("{}.{part}", layer.name);
    let t = bundle
        .get(&key)
        .ok_or_else(|| Error::load(&layer.name, format!("missing parameter `{key}`")))?;
    if t.shape() != shape {
        return Err(Error::load(
            &layer.name,
            format!("`{key}` has shape {:?}, expected {shape:?}", t.shape()),
        ));
    }
    Ok(t.clone())
}

/// All intermediate activations of one forward pass.
#[derive(Clone, Debug)]
pub struct ActivationTrace {
    model_id: u64,
    activations: Vec<Tensor>,
    argmax: Vec<Option<Vec<u32>>>,
}

impl ActivationTrace {
    pub(crate) fn model_id(&self) -> u64 {
        self.model_id
    }

    pub fn layer_count(&self) -> usize {
        self.argmax.len()
    }

    pub fn input(&self) -> &Tensor {
        &self.activations[0]
    }

    pub fn layer_input(&self, layer: usize) -> &Tensor {
        &self.activations[layer]
    }

    pub fn layer_output(&self, layer: usize) -> &Tensor {
        &self.activations[layer + 1]
    }

    pub fn logits(&self) -> &[f32] {
        self.activations.last().expect("nonempty").data()
    }

    /// Winning input index per output element of a max-pool layer.
    pub fn pool_argmax(&self, layer: usize) -> Option<&[u32]> {
        self.argmax[layer].as_deref()
    }
}
