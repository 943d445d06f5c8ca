use std::path::PathBuf;

use anyhow::Result;
use selrel::flow::{dense_flow, encode_srfl, flow_magnitude, FlowParams};
use selrel::meta::Sidecar;
use selrel::net::preprocess::{CLIP_FRAMES, CROP_SIZE};
use selrel::net::{prepare_frames, ClipGeometry};

use crate::artifacts::{write_artifact, write_volume, FrameSource};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of PNG frames, read in name order.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Smoothness weight.
    #[arg(long, default_value_t = FlowParams::default().alpha)]
    pub alpha: f32,
    #[arg(long, default_value_t = FlowParams::default().iterations)]
    pub iterations: usize,
    /// Window length; match the model's input.
    #[arg(long, default_value_t = CLIP_FRAMES)]
    pub clip_frames: usize,
    /// Crop size; match the model's input.
    #[arg(long, default_value_t = CROP_SIZE)]
    pub crop: usize,
    /// Output file stem.
    #[arg(long, default_value = "flow")]
    pub name: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let params = FlowParams {
        alpha: args.alpha,
        iterations: args.iterations,
        ..FlowParams::default()
    };
    params.validate()?;
    let src = FrameSource::load(&args.frames)?;
    let geom = ClipGeometry::for_input(args.clip_frames, args.crop);
    let frames = prepare_frames(&src.frames, args.start, geom)?;
    let field = dense_flow(&frames, &params)?;

    let mut meta = Sidecar::new();
    meta.set("frames_sha256", &src.sha256)?
        .set("window_start", args.start)?
        .set("clip", src.clip_key(args.start))?
        .set("alpha", params.alpha)?
        .set("iterations", params.iterations)?
        .set("clip_frames", args.clip_frames)?
        .set("crop", args.crop)?;
    let mut flow_meta = meta.clone();
    flow_meta.set("kind", "flow")?;
    write_artifact(&args.out.join(format!("{}.srfl", args.name)), &encode_srfl(&field), flow_meta)?;
    meta.set("kind", "flow_magnitude")?;
    write_volume(&args.out.join(format!("{}_mag.srvl", args.name)), &flow_magnitude(&field), meta)
}
