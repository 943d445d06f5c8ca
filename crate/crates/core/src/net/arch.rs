//! Architecture text and built-in presets.
//!
//! One layer per line, `kind key=value ...`, preceded by a single `input`
//! line. See `docs/formats.md` for the grammar.

use super::layer::{ConvSpec, LayerKind, LayerSpec, PoolSpec, Triple};
use crate::error::{Error, Result};
use crate::kv::{parse_lines, KvLine};

/// Per-channel RGB means subtracted during preprocessing when an
/// architecture does not declare its own.
pub const DEFAULT_MEANS: [f32; 3] = [90.0, 98.0, 102.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputShape {
    pub channels: usize,
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl InputShape {
    pub fn as_vec(&self) -> Vec<usize> {
        vec![self.channels, self.t, self.h, self.w]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub input: InputShape,
    pub means: [f32; 3],
    pub layers: Vec<LayerSpec>,
}

const C3D_101: &str = "\
# C3D, UCF-101 head
input channels=3 t=16 h=112 w=112
conv3d name=conv1a out=64 kernel=3 stride=1 pad=1
relu name=relu1a
maxpool3d name=pool1 window=1,2,2 stride=1,2,2
conv3d name=conv2a out=128 kernel=3 stride=1 pad=1
relu name=relu2a
maxpool3d name=pool2 window=2 stride=2
conv3d name=conv3a out=256 kernel=3 stride=1 pad=1
relu name=relu3a
conv3d name=conv3b out=256 kernel=3 stride=1 pad=1
relu name=relu3b
maxpool3d name=pool3 window=2 stride=2
conv3d name=conv4a out=512 kernel=3 stride=1 pad=1
relu name=relu4a
conv3d name=conv4b out=512 kernel=3 stride=1 pad=1
relu name=relu4b
maxpool3d name=pool4 window=2 stride=2
conv3d name=conv5a out=512 kernel=3 stride=1 pad=1
relu name=relu5a
conv3d name=conv5b out=512 kernel=3 stride=1 pad=1
relu name=relu5b
maxpool3d name=pool5 window=2 stride=2 pad=0,1,1
flatten name=flatten
dense name=fc6 out=4096
relu name=relu6
dense name=fc7 out=4096
relu name=relu7
dense name=fc8 out=101
";

const TOY3D_5: &str = "\
# small C3D-shaped network for demos and fixtures
input channels=3 t=16 h=112 w=112
conv3d name=conv1 out=4 kernel=3 stride=1 pad=1
relu name=relu1
maxpool3d name=pool1 window=1,4,4 stride=1,4,4
conv3d name=conv2 out=8 kernel=3 stride=1 pad=1
relu name=relu2
maxpool3d name=pool2 window=2,2,2 stride=2,2,2
conv3d name=conv3 out=8 kernel=3 stride=1 pad=1
relu name=relu3
gap3d name=gap
dense name=fc out=5
";

pub const PRESETS: &[(&str, &str)] = &[("c3d-101", C3D_101), ("toy3d-5", TOY3D_5)];

impl Architecture {
    pub fn preset(name: &str) -> Option<Architecture> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Architecture::parse(text).expect("built-in preset parses"))
    }

    pub fn preset_text(name: &str) -> Option<&'static str> {
        PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }

    pub fn parse(text: &str) -> Result<Architecture> {
        let lines = parse_lines(text)?;
        let mut iter = lines.iter();
        let first = iter.next().ok_or(Error::Parse {
            line: 0,
            message: "empty architecture".into(),
        })?;
        if first.head.as_deref() != Some("input") {
            return Err(first.error("first line must be `input ...`"));
        }
        expect_keys(first, &["channels", "t", "h", "w", "means"])?;
        let input = InputShape {
            channels: usize_key(first, "channels")?,
            t: usize_key(first, "t")?,
            h: usize_key(first, "h")?,
            w: usize_key(first, "w")?,
        };
        if [input.channels, input.t, input.h, input.w].contains(&0) {
            return Err(first.error("input dims must be >= 1"));
        }
        let means = match first.get("means") {
            Some(v) => {
                let m = parse_f32_list(first, v)?;
                <[f32; 3]>::try_from(m).map_err(|_| first.error("means needs 3 values"))?
            }
            None => DEFAULT_MEANS,
        };

        let mut layers: Vec<LayerSpec> = Vec::new();
        for line in iter {
            let layer = parse_layer(line, layers.len())?;
            if layers.iter().any(|l| l.name == layer.name) {
                return Err(line.error(format!("duplicate layer name `{}`", layer.name)));
            }
            layers.push(layer);
        }
        if layers.is_empty() {
            return Err(first.error("architecture has no layers"));
        }
        Ok(Architecture {
            input,
            means,
            layers,
        })
    }

    /// Renders the architecture back to its text form.
    pub fn to_text(&self) -> String {
        let join = |t: &Triple| format!("{},{},{}", t[0], t[1], t[2]);
        let i = &self.input;
        let mut out = format!(
            "input channels={} t={} h={} w={} means={},{},{}\n",
            i.channels, i.t, i.h, i.w, self.means[0], self.means[1], self.means[2]
        );
        for l in &self.layers {
            let body = match &l.kind {
                LayerKind::Conv3d(c) => format!(
                    " out={} kernel={} stride={} pad={}",
                    c.out_channels,
                    join(&c.kernel),
                    join(&c.stride),
                    join(&c.padding)
                ),
                LayerKind::MaxPool3d(p) => format!(
                    " window={} stride={} pad={}",
                    join(&p.window),
                    join(&p.stride),
                    join(&p.padding)
                ),
                LayerKind::Dense { out_features } => format!(" out={out_features}"),
                _ => String::new(),
            };
            out.push_str(&format!("{} name={}{}\n", l.kind.keyword(), l.name, body));
        }
        out
    }
}

fn expect_keys(line: &KvLine, allowed: &[&str]) -> Result<()> {
    if let Some(b) = line.bare.first() {
        return Err(line.error(format!("unexpected token `{b}`")));
    }
    for (k, _) in &line.pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(line.error(format!("unknown key `{k}`")));
        }
    }
    Ok(())
}

fn usize_key(line: &KvLine, key: &str) -> Result<usize> {
    let v = line
        .get(key)
        .ok_or_else(|| line.error(format!("missing `{key}`")))?;
    v.parse()
        .map_err(|_| line.error(format!("`{key}` must be a non-negative integer, got `{v}`")))
}

fn parse_f32_list(line: &KvLine, v: &str) -> Result<Vec<f32>> {
    v.split(',')
        .map(|s| {
            s.parse::<f32>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| line.error(format!("bad number `{s}`")))
        })
        .collect()
}

/// `3` expands to `3,3,3`; otherwise exactly three comma-separated values.
fn triple_key(line: &KvLine, key: &str, default: Option<usize>) -> Result<Triple> {
    let Some(v) = line.get(key) else {
        return default
            .map(|d| [d; 3])
            .ok_or_else(|| line.error(format!("missing `{key}`")));
    };
    let parts: Vec<usize> = v
        .split(',')
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| line.error(format!("`{key}` must be integers, got `{v}`")))?;
    match parts.as_slice() {
        [n] => Ok([*n; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(line.error(format!("`{key}` needs 1 or 3 values, got `{v}`"))),
    }
}

fn parse_layer(line: &KvLine, index: usize) -> Result<LayerSpec> {
    let kw = line
        .head
        .as_deref()
        .ok_or_else(|| line.error("missing layer kind"))?;
    let kind = match kw {
        "conv3d" => {
            expect_keys(line, &["name", "out", "kernel", "stride", "pad"])?;
            LayerKind::Conv3d(ConvSpec {
                out_channels: usize_key(line, "out")?,
                kernel: triple_key(line, "kernel", None)?,
                stride: triple_key(line, "stride", Some(1))?,
                padding: triple_key(line, "pad", Some(0))?,
            })
        }
        "maxpool3d" => {
            expect_keys(line, &["name", "window", "stride", "pad"])?;
            let window = triple_key(line, "window", None)?;
            let stride = match line.get("stride") {
                Some(_) => triple_key(line, "stride", None)?,
                None => window,
            };
            LayerKind::MaxPool3d(PoolSpec {
                window,
                stride,
                padding: triple_key(line, "pad", Some(0))?,
            })
        }
        "dense" => {
            expect_keys(line, &["name", "out"])?;
            LayerKind::Dense {
                out_features: usize_key(line, "out")?,
            }
        }
        "relu" | "flatten" | "gap3d" => {
            expect_keys(line, &["name"])?;
            match kw {
                "relu" => LayerKind::Relu,
                "flatten" => LayerKind::Flatten,
                _ => LayerKind::Gap3d,
            }
        }
        other => return Err(line.error(format!("unknown layer kind `{other}`"))),
    };
    let name = line
        .get("name")
        .map(str::to_string)
        .unwrap_or_else(|| format!("{kw}{index}"));
    if name == "input" || name.contains('.') {
        return Err(line.error(format!("reserved layer name `{name}`")));
    }
    let spec = LayerSpec { name, kind };
    spec.validate().map_err(|e| line.error(e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let c3d = Architecture::preset("c3d-101").unwrap();
        assert_eq!(c3d.input.as_vec(), vec![3, 16, 112, 112]);
        assert_eq!(c3d.layers.len(), 27);
        assert_eq!(
            c3d.layers.iter().filter(|l| matches!(l.kind, LayerKind::Conv3d(_))).count(),
            8
        );
        assert!(Architecture::preset("toy3d-5").is_some());
        assert!(Architecture::preset("nope").is_none());
    }

    #[test]
    fn text_round_trip() {
        let a = Architecture::preset("c3d-101").unwrap();
        assert_eq!(Architecture::parse(&a.to_text()).unwrap(), a);
    }

    #[test]
    fn auto_names_and_defaults() {
        let a = Architecture::parse(
            "input channels=1 t=2 h=3 w=3 means=1,2,3\nconv3d out=2 kernel=1,3,3\nrelu\nmaxpool3d window=2,1,1\n",
        )
        .unwrap();
        assert_eq!(a.layers[0].name, "conv3d0");
        assert_eq!(a.layers[1].name, "relu1");
        assert_eq!(a.means, [1.0, 2.0, 3.0]);
        match &a.layers[2].kind {
            LayerKind::MaxPool3d(p) => assert_eq!(p.stride, [2, 1, 1]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Architecture::parse("input channels=3 t=1 h=1 w=1\n\nconv3d out=2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = Architecture::parse("input channels=3 t=1 h=1 w=1\nsoftmax\n").unwrap_err();
        assert!(err.to_string().contains("softmax"));
        let err = Architecture::parse("dense out=3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Architecture::parse("input channels=3 t=1 h=1 w=1\ndense name=a out=1 bias=no\n")
            .unwrap_err();
        assert!(err.to_string().contains("bias"));
    }
}
