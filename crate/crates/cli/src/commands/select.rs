use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Result};
use selrel::meta::Sidecar;
use selrel::selective::{selective_relevance, SelectiveConfig, SelectiveResult, DEFAULT_N_SIGMA};

use super::split_list;
use crate::artifacts::{inherit, write_volume, LoadedVolume, PROVENANCE};

#[derive(clap::Args, Debug)]
pub struct SelectArgs {
    /// Baseline relevance volume (SRVL).
    #[arg(long)]
    pub relevance: PathBuf,
    /// Threshold in standard deviations of the edge map.
    #[arg(long, default_value_t = DEFAULT_N_SIGMA)]
    pub n_sigma: f64,
    /// Threshold the signed edge map instead of its magnitude.
    #[arg(long)]
    pub raw: bool,
    /// Method of the input when its sidecar lacks one.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub relevance: PathBuf,
    /// Strictly increasing, comma-separated thresholds.
    #[arg(long, default_value = "1,2,3,4")]
    pub n_sigma: String,
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn compute(input: &LoadedVolume, method: Option<&str>, n_sigma: f64, raw: bool) -> Result<SelectiveResult> {
    let base = input.relevance(method)?;
    ensure!(!base.method.selective, "{} is already selective", input.path.display());
    let cfg = SelectiveConfig {
        n_sigma,
        use_magnitude: !raw,
    };
    cfg.validate()?;
    Ok(selective_relevance(&base, &cfg)?)
}

fn write_triple(out: &Path, stem: &str, input: &LoadedVolume, res: &SelectiveResult) -> Result<()> {
    let mut common = Sidecar::new();
    inherit(&mut common, &input.meta, PROVENANCE)?;
    common
        .set("parent_sha256", &input.sha256)?
        .set("n_sigma", res.config.n_sigma)?
        .set("use_magnitude", res.config.use_magnitude)?
        .set("threshold", res.threshold_value)?;

    let mut edge = Sidecar::new();
    edge.set("kind", "edge_map")?;
    let mut mask = Sidecar::new();
    mask.set("kind", "mask")?.set("mask_voxels", res.mask.count())?;
    let mut sel = Sidecar::new();
    sel.set("kind", "relevance")?.set("method", res.selected.method)?;
    for meta in [&mut edge, &mut mask, &mut sel] {
        for (k, v) in common.entries() {
            meta.set(k, v)?;
        }
    }
    write_volume(&out.join(format!("{stem}_edge.srvl")), &res.edge_map, edge)?;
    write_volume(&out.join(format!("{stem}_mask.srvl")), res.mask.volume(), mask)?;
    write_volume(&out.join(format!("{stem}_selected.srvl")), &res.selected.volume, sel)?;
    Ok(())
}

pub fn run(args: SelectArgs) -> Result<()> {
    let input = LoadedVolume::read(&args.relevance)?;
    let res = compute(&input, args.method.as_deref(), args.n_sigma, args.raw)?;
    fs::create_dir_all(&args.out)?;
    write_triple(&args.out, &input.stem(), &input, &res)
}

/// `2.5` → `2p5`, for file names.
fn sigma_tag(n: f64) -> String {
    format!("{n}").replace('.', "p")
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let sigmas: Vec<f64> = split_list(&args.n_sigma)?;
    ensure!(!sigmas.is_empty(), "--n-sigma is empty");
    if sigmas.windows(2).any(|p| p[1] <= p[0]) {
        bail!("--n-sigma must be strictly increasing, got {}", args.n_sigma);
    }
    let input = LoadedVolume::read(&args.relevance)?;
    fs::create_dir_all(&args.out)?;
    let stem = input.stem();
    let mut report = String::new();
    let mut prev: Option<(f64, selrel::selective::SupportMask)> = None;
    let mut nested = true;
    for &n in &sigmas {
        let res = compute(&input, args.method.as_deref(), n, args.raw)?;
        write_triple(&args.out, &format!("{stem}_n{}", sigma_tag(n)), &input, &res)?;
        let mut line = format!("n_sigma={n} threshold={:.6e} mask_voxels={}", res.threshold_value, res.mask.count());
        if let Some((pn, pm)) = &prev {
            let ok = res.mask.is_subset_of(pm);
            nested &= ok;
            write!(line, " subset_of_n{pn}={}", if ok { "yes" } else { "NO" })?;
        }
        writeln!(report, "{line}")?;
        prev = Some((n, res.mask));
    }
    writeln!(report, "nested={}", if nested { "yes" } else { "no" })?;
    fs::write(args.out.join(format!("{stem}_sweep.txt")), &report)?;
    print!("{report}");
    ensure!(nested, "masks are not nested across thresholds");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags() {
        assert_eq!(sigma_tag(4.0), "4");
        assert_eq!(sigma_tag(2.5), "2p5");
    }
}
