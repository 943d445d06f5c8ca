use std::fmt;

use crate::error::{Error, Result};

/// Spatio-temporal triple, ordered `(t, h, w)`.
pub type Triple = [usize; 3];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: Triple,
    pub stride: Triple,
    pub padding: Triple,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: Triple,
    pub stride: Triple,
    /// Padded positions never win the max.
    pub padding: Triple,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv3d(ConvSpec),
    Relu,
    MaxPool3d(PoolSpec),
    Flatten,
    /// Fully connected; inputs of any rank are read in flattened order.
    Dense { out_features: usize },
    /// Global average over `(t, h, w)` per channel.
    Gap3d,
}

impl LayerKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            LayerKind::Conv3d(_) => "conv3d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool3d(_) => "maxpool3d",
            LayerKind::Flatten => "flatten",
            LayerKind::Dense { .. } => "dense",
            LayerKind::Gap3d => "gap3d",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerKind::Conv3d(_) | LayerKind::Dense { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.kind.keyword())
    }
}

fn out_extent(input: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    let padded = input + 2 * p;
    (padded >= k).then(|| (padded - k) / s + 1)
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::load(&self.name, msg));
        match &self.kind {
            LayerKind::Conv3d(c) => {
                if c.out_channels == 0 {
                    return bad("out_channels must be >= 1");
                }
                if c.kernel.contains(&0) || c.stride.contains(&0) {
                    return bad("kernel and stride must be >= 1");
                }
            }
            LayerKind::MaxPool3d(p) => {
                if p.window.contains(&0) || p.stride.contains(&0) {
                    return bad("window and stride must be >= 1");
                }
                if p.padding.iter().zip(&p.window).any(|(&pad, &w)| pad >= w) {
                    return bad("padding must be smaller than the window");
                }
            }
            LayerKind::Dense { out_features: 0 } => return bad("out must be >= 1"),
            _ => {}
        }
        Ok(())
    }

    /// Output shape for `input`, or a load error naming this layer.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let err = |msg: String| Error::load(&self.name, msg);
        let volume = |what: &str| -> Result<[usize; 4]> {
            match *input {
                [c, t, h, w] => Ok([c, t, h, w]),
                _ => Err(err(format!("{what} expects a c×t×h×w input, got {input:?}"))),
            }
        };
        match &self.kind {
            LayerKind::Conv3d(spec) => {
                let [_, t, h, w] = volume("conv3d")?;
                let mut out = vec![spec.out_channels];
                for (i, n) in [t, h, w].into_iter().enumerate() {
                    out.push(
                        out_extent(n, spec.kernel[i], spec.stride[i], spec.padding[i])
                            .ok_or_else(|| err(format!("kernel larger than input {input:?}")))?,
                    );
                }
                Ok(out)
            }
            LayerKind::MaxPool3d(spec) => {
                let [c, t, h, w] = volume("maxpool3d")?;
                let mut out = vec![c];
                for (i, n) in [t, h, w].into_iter().enumerate() {
                    out.push(
                        out_extent(n, spec.window[i], spec.stride[i], spec.padding[i])
                            .ok_or_else(|| err(format!("window larger than input {input:?}")))?,
                    );
                }
                Ok(out)
            }
            LayerKind::Relu => Ok(input.to_vec()),
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::Dense { out_features } => Ok(vec![*out_features]),
            LayerKind::Gap3d => {
                let [c, ..] = volume("gap3d")?;
                Ok(vec![c])
            }
        }
    }

    /// Expected `(weight shape, bias shape)` given the layer input shape.
    pub fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        match &self.kind {
            LayerKind::Conv3d(c) => {
                let mut w = vec![c.out_channels, input[0]];
                w.extend_from_slice(&c.kernel);
                Some((w, vec![c.out_channels]))
            }
            LayerKind::Dense { out_features } => Some((
                vec![*out_features, input.iter().product()],
                vec![*out_features],
            )),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(k: usize, s: usize, p: usize) -> LayerSpec {
        LayerSpec {
            name: "c".into(),
            kind: LayerKind::Conv3d(ConvSpec {
                out_channels: 8,
                kernel: [k; 3],
                stride: [s; 3],
                padding: [p; 3],
            }),
        }
    }

    #[test]
    fn conv_shapes() {
        assert_eq!(
            conv(3, 1, 1).output_shape(&[3, 16, 112, 112]).unwrap(),
            vec![8, 16, 112, 112]
        );
        assert_eq!(
            conv(3, 2, 0).output_shape(&[3, 7, 9, 9]).unwrap(),
            vec![8, 3, 4, 4]
        );
        assert!(conv(5, 1, 0).output_shape(&[3, 4, 9, 9]).is_err());
        assert!(conv(3, 1, 1).output_shape(&[12]).is_err());
    }

    #[test]
    fn pool_with_padding() {
        let l = LayerSpec {
            name: "pool5".into(),
            kind: LayerKind::MaxPool3d(PoolSpec {
                window: [2, 2, 2],
                stride: [2, 2, 2],
                padding: [0, 1, 1],
            }),
        };
        assert_eq!(l.output_shape(&[512, 2, 7, 7]).unwrap(), vec![512, 1, 4, 4]);
    }

    #[test]
    fn validation() {
        assert!(conv(0, 1, 0).validate().is_err());
        assert!(conv(3, 0, 0).validate().is_err());
        let l = LayerSpec {
            name: "p".into(),
            kind: LayerKind::MaxPool3d(PoolSpec {
                window: [2, 2, 2],
                stride: [2, 2, 2],
                padding: [2, 0, 0],
            }),
        };
        assert!(l.validate().is_err());
    }
}
