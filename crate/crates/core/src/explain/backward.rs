use super::check_trace;
use crate::error::{Error, Result};
use crate::net::{ops, ActivationTrace, LayerKind, Model, Tensor};

/// How the ReLU backward pass gates gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReluMode {
    /// Pass where the forward input was positive.
    Standard,
    /// Pass where the forward input was positive and the incoming gradient
    /// is positive.
    Guided,
}

/// Where backpropagation stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradTarget {
    /// Gradient with respect to the model input.
    Input,
    /// Gradient with respect to the output of layer `i`.
    LayerOutput(usize),
}

impl GradTarget {
    /// `"input"` or a layer name.
    pub fn resolve(model: &Model, name: &str) -> Result<Self> {
        if name == "input" {
            return Ok(GradTarget::Input);
        }
        model
            .layer_index(name)
            .map(GradTarget::LayerOutput)
            .ok_or_else(|| Error::input(format!("no layer named `{name}`")))
    }
}

/// Gradient of one class logit at a chosen layer position.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTensor {
    pub target: GradTarget,
    pub relu_mode: ReluMode,
    pub tensor: Tensor,
}

/// Vector–Jacobian product of a one-hot seed at `class_idx` back to
/// `target`. Max-pool gradients are routed to the traced winners.
pub fn backward(
    model: &Model,
    trace: &ActivationTrace,
    class_idx: usize,
    relu_mode: ReluMode,
    target: GradTarget,
) -> Result<GradientTensor> {
    check_trace(model, trace, class_idx)?;
    let n = model.layers().len();
    let stop = match target {
        GradTarget::Input => 0,
        GradTarget::LayerOutput(i) if i < n => i + 1,
        GradTarget::LayerOutput(i) => {
            return Err(Error::input(format!("layer index {i} out of range")));
        }
    };
    let mut g = Tensor::zeros(model.output_shape_of(n - 1).to_vec());
    g.data_mut()[class_idx] = 1.0;
    for i in (stop..n).rev() {
        g = vjp(model, trace, i, g, relu_mode)?;
    }
    Ok(GradientTensor {
        target,
        relu_mode,
        tensor: g,
    })
}

/// Maps a gradient at the output of layer `i` to its input.
fn vjp(model: &Model, trace: &ActivationTrace, i: usize, g: Tensor, mode: ReluMode) -> Result<Tensor> {
    let in_shape = model.input_shape_of(i);
    let x = trace.layer_input(i);
    Ok(match &model.layers()[i].kind {
        LayerKind::Conv3d(spec) => {
            let p = model.params(i).expect("conv params");
            ops::conv3d_transpose(&g, p.weight.data(), spec, in_shape)
        }
        LayerKind::Relu => {
            let data = g
                .data()
                .iter()
                .zip(x.data())
                .map(|(&gv, &xv)| {
                    let open = xv > 0.0 && (mode == ReluMode::Standard || gv > 0.0);
                    if open {
                        gv
                    } else {
                        0.0
                    }
                })
                .collect();
            Tensor::new(in_shape.to_vec(), data)?
        }
        LayerKind::MaxPool3d(_) => {
            let arg = trace.pool_argmax(i).expect("pool argmax traced");
            ops::unpool(&g, arg, in_shape)
        }
        LayerKind::Flatten => g.reshape(in_shape.to_vec())?,
        LayerKind::Dense { .. } => {
            let p = model.params(i).expect("dense params");
            let n_in = in_shape.iter().product();
            Tensor::new(in_shape.to_vec(), ops::dense_transpose(g.data(), p.weight.data(), n_in))?
        }
        LayerKind::Gap3d => ops::gap3d_transpose(g.data(), in_shape),
    })
}
