use std::path::PathBuf;

use anyhow::{ensure, Result};
use clap::ValueEnum;
use rayon::prelude::*;
use selrel::net::{prepare_frames, ClipGeometry};
use selrel::render::{render_grid, render_overlay, write_png_sequence, Colormap, RenderMode, RenderOptions};

use crate::artifacts::{FrameSource, LoadedVolume};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CmapArg {
    Grayscale,
    Diverging,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Heatmap,
    MaskComposite,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of PNG frames the volumes were computed from.
    #[arg(long)]
    pub frames: PathBuf,
    /// Relevance volumes; repeatable.
    #[arg(long, required = true, num_args = 1..)]
    pub relevance: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "diverging")]
    pub colormap: CmapArg,
    #[arg(long, value_enum, default_value = "heatmap")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = RenderOptions::default().alpha)]
    pub alpha: f32,
    #[arg(long, default_value_t = RenderOptions::default().eps_r)]
    pub eps_r: f32,
    /// Window start, when the sidecar does not record one.
    #[arg(long)]
    pub start: Option<usize>,
    /// Also write side-by-side sheets: the frame, then each volume.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let opts = RenderOptions {
        colormap: match args.colormap {
            CmapArg::Grayscale => Colormap::Grayscale,
            CmapArg::Diverging => Colormap::Diverging,
        },
        alpha: args.alpha,
        mode: match args.mode {
            ModeArg::Heatmap => RenderMode::Heatmap,
            ModeArg::MaskComposite => RenderMode::MaskComposite,
        },
        eps_r: args.eps_r,
    };
    opts.validate()?;
    let vols = args.relevance.iter().map(|p| LoadedVolume::read(p)).collect::<Result<Vec<_>>>()?;
    let dims = vols[0].volume.dims();
    for v in &vols {
        ensure!(v.volume.dims() == dims, "{} is {}, expected {dims}", v.path.display(), v.volume.dims());
    }
    ensure!(dims.h == dims.w, "volumes must be square in h and w, got {dims}");
    let start = match args.start {
        Some(s) => s,
        None => vols[0].meta.get("window_start").and_then(|s| s.parse().ok()).unwrap_or(0),
    };
    let src = FrameSource::load(&args.frames)?;
    let frames = prepare_frames(&src.frames, start, ClipGeometry::for_input(dims.t, dims.h))?;

    let rendered = vols
        .par_iter()
        .map(|v| Ok(render_overlay(&frames, &v.volume, &opts)?))
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![("frame".to_string(), frames)];
    for (v, images) in vols.iter().zip(rendered) {
        write_png_sequence(&args.out, &v.stem(), &images)?;
        let label = v.meta.get("method").map_or_else(|| v.stem(), str::to_string);
        columns.push((label, images));
    }
    if args.grid {
        write_png_sequence(&args.out, "grid", &render_grid(&columns)?)?;
    }
    Ok(())
}
