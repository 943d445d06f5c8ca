use std::fs;
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use rayon::prelude::*;
use selrel::explain::{
    combine_guided_gradcam, explain, gradcam_explain, guided_backprop_explain, Method, RelevanceVolume,
};
use selrel::meta::Sidecar;
use selrel::net::{preprocess_window, Architecture, ClipGeometry, Model, WeightBundle};

use super::split_list;
use crate::artifacts::{sha256_hex, write_volume, FrameSource};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Preset name (`c3d-101`, `toy3d-5`) or architecture file.
    #[arg(long)]
    pub model: String,
    /// SRWB weight bundle.
    #[arg(long)]
    pub weights: PathBuf,
    /// Directory of PNG frames, read in name order.
    #[arg(long)]
    pub frames: PathBuf,
    /// Comma-separated: dtd, gradcam, guided_bp, guided_gradcam.
    #[arg(long, default_value = "dtd")]
    pub method: String,
    /// Target class (default: the top-scoring one per window).
    #[arg(long)]
    pub class: Option<usize>,
    /// First frame of the first window.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Explain every window `start + k*stride` that fits in the video.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Conv layer for GradCAM (default: the last one).
    #[arg(long)]
    pub target_layer: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

struct Loaded {
    model: Model,
    name: String,
    sha256: String,
}

fn load_model(args: &Args) -> Result<Loaded> {
    let arch = match Architecture::preset(&args.model) {
        Some(a) => a,
        None => {
            let text = fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model))?;
            Architecture::parse(&text)?
        }
    };
    let bytes = fs::read(&args.weights).with_context(|| format!("reading {}", args.weights.display()))?;
    let mut hashed = arch.to_text().into_bytes();
    hashed.extend_from_slice(&bytes);
    let model = Model::load(arch, &WeightBundle::decode(&bytes)?)?;
    Ok(Loaded {
        model,
        name: args.model.clone(),
        sha256: sha256_hex(&hashed),
    })
}

fn run_method(model: &Model, trace: &selrel::net::ActivationTrace, class: usize, m: Method, target: Option<&str>) -> Result<RelevanceVolume> {
    Ok(match (m, target) {
        (Method::GradCam, Some(_)) => gradcam_explain(model, trace, class, target)?,
        (Method::GuidedGradCam, Some(_)) => {
            let cam = gradcam_explain(model, trace, class, target)?;
            let gbp = guided_backprop_explain(model, trace, class)?;
            combine_guided_gradcam(&cam, &gbp)?
        }
        _ => explain(model, trace, class, m)?,
    })
}

/// Window starts: `start`, then every `stride` frames while a full
/// window fits.
fn window_starts(n_frames: usize, start: usize, stride: Option<usize>, len: usize) -> Result<Vec<usize>> {
    ensure!(start < n_frames, "--start {start} is past the last frame ({n_frames} frames)");
    let Some(stride) = stride else {
        return Ok(vec![start]);
    };
    ensure!(stride >= 1, "--stride must be >= 1");
    let mut starts = vec![start];
    let mut s = start + stride;
    while s + len <= n_frames {
        starts.push(s);
        s += stride;
    }
    Ok(starts)
}

pub fn run(args: Args) -> Result<()> {
    let methods: Vec<Method> = split_list(&args.method)?;
    ensure!(!methods.is_empty(), "--method is empty");
    let loaded = load_model(&args)?;
    let model = &loaded.model;
    let input = model.input_shape();
    ensure!(input.channels == 3, "model must take RGB input");
    ensure!(input.h == input.w, "model input must be square, got {}x{}", input.h, input.w);
    if let Some(c) = args.class {
        ensure!(c < model.class_count(), "--class {c} out of range ({} classes)", model.class_count());
    }
    let src = FrameSource::load(&args.frames)?;
    let geom = ClipGeometry::for_input(input.t, input.h);
    let starts = window_starts(src.frames.len(), args.start, args.stride, input.t)?;
    let multi = starts.len() > 1;
    fs::create_dir_all(&args.out)?;

    starts.par_iter().try_for_each(|&start| -> Result<()> {
        let clip = preprocess_window(&src.frames, start, model.means(), geom)?;
        let (logits, trace) = model.forward(&clip)?;
        let class = args.class.unwrap_or_else(|| argmax(&logits));
        for &m in &methods {
            let r = run_method(model, &trace, class, m, args.target_layer.as_deref())
                .with_context(|| format!("method {m} on window {start}"))?;
            let name = if multi {
                format!("{m}_w{start:04}.srvl")
            } else {
                format!("{m}.srvl")
            };
            let mut meta = Sidecar::new();
            meta.set("kind", "relevance")?
                .set("method", r.method)?
                .set("class", class)?
                .set("logit", logits[class])?
                .set("model", &loaded.name)?
                .set("model_sha256", &loaded.sha256)?
                .set("frames_sha256", &src.sha256)?
                .set("window_start", start)?
                .set("clip", src.clip_key(start))?
                .set("channel_collapse", "sum")?;
            if let Some(t) = &args.target_layer {
                meta.set("target_layer", t)?;
            }
            let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
            meta.set("flags", if flags.is_empty() { "none".to_string() } else { flags.join(",") })?;
            write_volume(&args.out.join(name), &r.volume, meta)?;
        }
        Ok(())
    })
}

/// First index of the largest value.
fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
