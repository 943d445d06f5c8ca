use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Subcommand;
use selrel::explain::{Method, MethodTag};
use selrel::fixtures::{motion_relevance, moving_square, random_bundle, tiny_arch, SquareScene, SquareSpec};
use selrel::meta::Sidecar;
use selrel::net::Architecture;
use selrel::render::write_png_sequence;

use super::split_list;
use crate::artifacts::{write_artifact, write_volume, FrameSource};

#[derive(Subcommand, Debug)]
pub enum FixtureCommand {
    /// PNG frames of a textured square translating over a static background.
    Square(SquareArgs),
    /// Square frames plus constructed relevance and its motion support.
    Motion(MotionArgs),
    /// Seeded random SRWB bundle for an architecture.
    Weights(WeightsArgs),
}

#[derive(clap::Args, Debug)]
pub struct SquareArgs {
    #[arg(long, default_value_t = SquareSpec::default().frames)]
    pub count: usize,
    /// Frame height and width.
    #[arg(long, default_value_t = SquareSpec::default().h)]
    pub size: usize,
    /// Side of the square.
    #[arg(long, default_value_t = SquareSpec::default().size)]
    pub square: usize,
    /// Top-left corner at frame 0, `y,x`.
    #[arg(long, default_value = "44,20")]
    pub origin: String,
    /// Displacement per frame, `dy,dx`.
    #[arg(long, default_value = "0,3", allow_hyphen_values = true)]
    pub velocity: String,
    /// Flat background instead of a random texture.
    #[arg(long)]
    pub flat: bool,
    #[arg(long, default_value_t = SquareSpec::default().seed)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct MotionArgs {
    #[command(flatten)]
    pub square: SquareArgs,
    /// Share of relevance mass in the static blob.
    #[arg(long, default_value_t = 0.8)]
    pub static_share: f64,
}

#[derive(clap::Args, Debug)]
pub struct WeightsArgs {
    /// Preset, tiny fixture net, or architecture file.
    #[arg(long)]
    pub arch: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub zero_bias: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cmd: FixtureCommand) -> Result<()> {
    match cmd {
        FixtureCommand::Square(a) => square(&a).map(|_| ()),
        FixtureCommand::Motion(a) => motion(&a),
        FixtureCommand::Weights(a) => weights(&a),
    }
}

fn pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T)>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let mut v = split_list::<T>(s)?;
    match (v.pop(), v.pop(), v.is_empty()) {
        (Some(b), Some(a), true) => Ok((a, b)),
        _ => anyhow::bail!("--{what} takes two comma-separated values, got `{s}`"),
    }
}

fn square(a: &SquareArgs) -> Result<(SquareScene, PathBuf)> {
    let spec = SquareSpec {
        frames: a.count,
        h: a.size,
        w: a.size,
        size: a.square,
        origin: pair(&a.origin, "origin")?,
        velocity: pair(&a.velocity, "velocity")?,
        seed: a.seed,
        textured: !a.flat,
    };
    let scene = moving_square(spec)?;
    let dir = a.out.join("frames");
    write_png_sequence(&dir, "frame", &scene.frames)?;
    Ok((scene, dir))
}

fn motion(a: &MotionArgs) -> Result<()> {
    let (scene, dir) = square(&a.square)?;
    let fixture = motion_relevance(&scene, a.static_share)?;
    let src = FrameSource::load(&dir)?;
    let mut common = Sidecar::new();
    common
        .set("frames_sha256", &src.sha256)?
        .set("window_start", 0)?
        .set("clip", src.clip_key(0))?
        .set("seed", a.square.seed)?;

    let mut rel = common.clone();
    rel.set("kind", "relevance")?
        .set("method", MethodTag::base(Method::Dtd))?
        .set("class", 0)?
        .set("static_share", a.static_share)?;
    write_volume(&a.square.out.join("relevance.srvl"), &fixture.relevance, rel)?;

    let mut sup = common;
    sup.set("kind", "flow_magnitude")?.set("source", "square-support")?;
    write_volume(&a.square.out.join("support.srvl"), &scene.support, sup)
}

fn weights(a: &WeightsArgs) -> Result<()> {
    let arch = match Architecture::preset(&a.arch).or_else(|| tiny_arch(&a.arch)) {
        Some(x) => x,
        None => Architecture::parse(&fs::read_to_string(&a.arch).with_context(|| format!("reading {}", a.arch))?)?,
    };
    let bundle = random_bundle(&arch, a.seed, a.zero_bias)?;
    let mut meta = Sidecar::new();
    meta.set("kind", "weights")?
        .set("arch", &a.arch)?
        .set("seed", a.seed)?
        .set("zero_bias", a.zero_bias)?;
    write_artifact(&a.out, &bundle.encode(), meta)?;
    // Non-preset nets get their architecture text next to the bundle.
    if Architecture::preset(&a.arch).is_none() {
        fs::write(a.out.with_extension("arch"), arch.to_text())?;
    }
    Ok(())
}
