use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::ValueEnum;
use selrel::explain::{explain, Method, MethodTag, RelevanceVolume};
use selrel::fixtures::{random_input, random_model, random_relevance};
use selrel::metrics::{benchmark, TimingReport, TimingStats, DEFAULT_WARMUP};
use selrel::net::{Architecture, ClipTensor, Model};
use selrel::selective::{selective_relevance, SelectiveConfig, DEFAULT_N_SIGMA};
use selrel::Dims3;

use crate::artifacts::LoadedVolume;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    /// Forward pass plus baseline explanation.
    Explain,
    /// Edge map, mask and product on an existing relevance volume.
    SelectiveStep,
    /// Explanation followed by the selective step.
    Combined,
    All,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(value_enum)]
    pub task: Task,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: usize,
    #[arg(long, default_value = "dtd")]
    pub method: Method,
    /// Preset or architecture file for the explain tasks.
    #[arg(long, default_value = "toy3d-5")]
    pub model: String,
    /// SRWB bundle; seeded random weights when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Relevance volume for `selective-step`; seeded synthetic
    /// 16×112×112 volume when absent.
    #[arg(long)]
    pub relevance: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_N_SIGMA)]
    pub n_sigma: f64,
    /// Seed for synthetic weights, clip and relevance.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn load_model(args: &Args) -> Result<Model> {
    let arch = match Architecture::preset(&args.model) {
        Some(a) => a,
        None => Architecture::parse(&fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model))?)?,
    };
    Ok(match &args.weights {
        Some(w) => Model::load(arch, &selrel::net::WeightBundle::read(w)?)?,
        None => random_model(arch, args.seed, false)?,
    })
}

fn relevance_subject(args: &Args) -> Result<RelevanceVolume> {
    match &args.relevance {
        Some(p) => LoadedVolume::read(p)?.relevance(Some(args.method.as_str())),
        None => Ok(RelevanceVolume::new(
            random_relevance(Dims3::new(16, 112, 112), 0.3, args.seed),
            MethodTag::base(args.method),
            0,
        )),
    }
}

fn explain_once(model: &Model, clip: &ClipTensor, method: Method) -> Result<RelevanceVolume> {
    let (logits, trace) = model.forward(clip)?;
    let class = (0..logits.len()).fold(0, |b, i| if logits[i] > logits[b] { i } else { b });
    Ok(explain(model, &trace, class, method)?)
}

fn timed(args: &Args, cfg: &SelectiveConfig) -> Result<Vec<TimingStats>> {
    let mut rows = Vec::new();
    let wants = |t: Task| args.task == t || args.task == Task::All;
    if wants(Task::Explain) || wants(Task::Combined) {
        let model = load_model(args)?;
        let shape = model.input_shape();
        let x = random_input(shape, model.means(), args.seed);
        let clip = ClipTensor::new(shape.t, shape.h, shape.w, x.into_data())?;
        explain_once(&model, &clip, args.method)?;
        if wants(Task::Explain) {
            rows.push(benchmark(args.method.as_str(), args.reps, args.warmup, || {
                explain_once(&model, &clip, args.method).expect("checked above")
            })?);
        }
        if wants(Task::Combined) {
            let label = MethodTag::base(args.method).selective().to_string();
            rows.push(benchmark(label, args.reps, args.warmup, || {
                let r = explain_once(&model, &clip, args.method).expect("checked above");
                selective_relevance(&r, cfg).expect("valid config")
            })?);
        }
    }
    if wants(Task::SelectiveStep) {
        let r = relevance_subject(args)?;
        selective_relevance(&r, cfg)?;
        rows.push(benchmark("selective-step", args.reps, args.warmup, || {
            selective_relevance(&r, cfg).expect("checked above")
        })?);
    }
    Ok(rows)
}

pub fn run(args: Args) -> Result<()> {
    let cfg = SelectiveConfig::new(args.n_sigma)?;
    // Timed bodies always run on one worker, whatever --workers says.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let rows = pool.install(|| timed(&args, &cfg))?;
    let report = TimingReport { rows };

    let mut text = report.to_text();
    let base = args.method.as_str();
    let combined = MethodTag::base(args.method).selective().to_string();
    if let Some(o) = report.overhead_ms(base, &combined) {
        writeln!(text, "overhead ({combined} - {base}): {o:.3} ms")?;
    }
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("timing.csv"), report.to_csv())?;
    fs::write(args.out.join("timing.txt"), &text)?;
    print!("{text}");
    Ok(())
}
