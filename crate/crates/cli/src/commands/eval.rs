use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use selrel::explain::RelevanceVolume;
use selrel::metrics::{
    agreement, metrics_csv, metrics_text, motion_precision, selectivity_ratios, AgreementMode, ClipMetrics,
    MetricsReport, RelevanceEps, DEFAULT_EPS_O, DEFAULT_EPS_R_REL,
};
use selrel::Error as CoreError;

use crate::artifacts::LoadedVolume;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Relevance volumes (baseline and selective); repeatable.
    #[arg(long, required = true, num_args = 1..)]
    pub relevance: Vec<PathBuf>,
    /// Flow magnitude volumes, matched to relevance by clip; repeatable.
    #[arg(long, num_args = 1..)]
    pub flow: Vec<PathBuf>,
    /// Relevance threshold as a fraction of max|R|.
    #[arg(long, default_value_t = DEFAULT_EPS_R_REL, conflicts_with = "eps_r_abs")]
    pub eps_r: f32,
    /// Absolute relevance threshold instead of --eps-r.
    #[arg(long)]
    pub eps_r_abs: Option<f32>,
    /// Flow magnitude threshold, px/frame.
    #[arg(long, default_value_t = DEFAULT_EPS_O)]
    pub eps_o: f32,
    /// iou or directional.
    #[arg(long, default_value = "iou")]
    pub agreement: AgreementMode,
    /// Compare volumes produced by different models.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

struct Item {
    file: LoadedVolume,
    rel: RelevanceVolume,
}

const NO_CLIP: &str = "-";

/// `Ok(None)` when the metric is undefined for lack of support.
fn defined<T>(r: selrel::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CoreError::EmptyRelevance(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn check_models(items: &[Item], force: bool) -> Result<()> {
    let mut seen: Option<(&str, &PathBuf)> = None;
    for it in items {
        let Some(h) = it.file.meta.get("model_sha256") else { continue };
        match seen {
            None => seen = Some((h, &it.file.path)),
            Some((h0, p0)) if h0 != h && !force => bail!(
                "{} and {} come from different models; pass --force to compare anyway",
                p0.display(),
                it.file.path.display()
            ),
            _ => {}
        }
    }
    Ok(())
}

pub fn run(args: Args) -> Result<()> {
    let eps = match args.eps_r_abs {
        Some(a) => RelevanceEps::Absolute(a),
        None => RelevanceEps::Relative(args.eps_r),
    };
    eps.resolve(&selrel::Volume3::zeros(selrel::Dims3::new(1, 1, 1)))?;
    anyhow::ensure!(args.eps_o.is_finite() && args.eps_o >= 0.0, "--eps-o must be >= 0");

    let items = args
        .relevance
        .iter()
        .map(|p| {
            let file = LoadedVolume::read(p)?;
            if let Some(kind) = file.meta.get("kind") {
                anyhow::ensure!(kind == "relevance", "{} holds `{kind}`, not relevance", p.display());
            }
            let rel = file.relevance(None)?;
            Ok(Item { file, rel })
        })
        .collect::<Result<Vec<_>>>()?;
    check_models(&items, args.force)?;

    let flows = args.flow.iter().map(|p| LoadedVolume::read(p)).collect::<Result<Vec<_>>>()?;
    let mut flow_by_clip: BTreeMap<&str, &LoadedVolume> = BTreeMap::new();
    for f in &flows {
        let key = f.clip().unwrap_or(NO_CLIP);
        if flow_by_clip.insert(key, f).is_some() {
            bail!("two flow volumes for clip {key}");
        }
    }

    let mut clips: BTreeMap<&str, Vec<&Item>> = BTreeMap::new();
    for it in &items {
        clips.entry(it.file.clip().unwrap_or(NO_CLIP)).or_default().push(it);
    }

    let per_clip = clips
        .par_iter()
        .map(|(&key, members)| {
            let flow = flow_by_clip.get(key).copied().or(if flows.len() == 1 && key == NO_CLIP {
                flows.first()
            } else {
                None
            });
            let mut res = evaluate_clip(key, members, flow, eps, args.eps_o, args.agreement)?;
            if flow.is_none() && !flows.is_empty() {
                writeln!(res.1, "note: no flow volume matches clip {key}; precision skipped")?;
            }
            Ok(res)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut by_label: BTreeMap<String, Vec<ClipMetrics>> = BTreeMap::new();
    let mut notes = String::new();
    for (rows, clip_notes) in per_clip {
        for (label, m) in rows {
            by_label.entry(label).or_default().push(m);
        }
        notes.push_str(&clip_notes);
    }
    let reports: Vec<MetricsReport> = by_label
        .iter()
        .map(|(label, ms)| MetricsReport::aggregate(label.clone(), ms))
        .collect();

    let mut text = String::new();
    writeln!(text, "eps_r: {eps}")?;
    writeln!(text, "eps_o: {}", args.eps_o)?;
    text.push_str(&metrics_text(&reports, args.agreement));
    text.push_str(&notes);
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("metrics.txt"), &text)?;
    fs::write(args.out.join("metrics.csv"), metrics_csv(&reports))?;
    print!("{text}");
    Ok(())
}

type ClipRows = (Vec<(String, ClipMetrics)>, String);

fn evaluate_clip(
    key: &str,
    members: &[&Item],
    flow: Option<&LoadedVolume>,
    eps: RelevanceEps,
    eps_o: f32,
    mode: AgreementMode,
) -> Result<ClipRows> {
    let dims = members[0].rel.dims();
    for it in members.iter().map(|m| &m.file).chain(flow) {
        if it.volume.dims() != dims {
            bail!(
                "clip {key}: {} is {}, {} is {}",
                it.path.display(),
                it.volume.dims(),
                members[0].file.path.display(),
                dims
            );
        }
    }
    let mut rows = Vec::new();
    let mut notes = String::new();
    for it in members {
        let mut m = ClipMetrics::default();
        if let Some(f) = flow {
            m.precision_pct = defined(motion_precision(&it.rel, &f.volume, eps, eps_o))
                .with_context(|| format!("precision of {}", it.file.path.display()))?;
            if m.precision_pct.is_none() {
                writeln!(notes, "note: {} has no relevant voxels; precision undefined", it.file.path.display())?;
            }
        }
        if it.rel.method.selective {
            let parent = it.file.meta.get("parent_sha256");
            if let Some(base) = members.iter().find(|b| Some(b.file.sha256.as_str()) == parent) {
                if let Some((area, mass)) = defined(selectivity_ratios(&it.rel, &base.rel, eps))
                    .with_context(|| format!("selectivity of {}", it.file.path.display()))?
                {
                    m.selectivity_area_pct = Some(area);
                    m.selectivity_mass_pct = Some(mass);
                }
            }
        }
        rows.push((it.rel.method.to_string(), m));
    }
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            if a.rel.method == b.rel.method || a.rel.method.selective != b.rel.method.selective {
                continue;
            }
            let (a, b) = if a.rel.method.to_string() <= b.rel.method.to_string() { (a, b) } else { (b, a) };
            let pct = defined(agreement(&a.rel, &b.rel, eps, mode))?;
            rows.push((
                format!("{}~{}", a.rel.method, b.rel.method),
                ClipMetrics {
                    agreement_pct: pct,
                    ..ClipMetrics::default()
                },
            ));
        }
    }
    Ok((rows, notes))
}
