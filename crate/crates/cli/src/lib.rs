//! The `selrel` command line.

mod artifacts;
mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

pub use artifacts::{meta_path, sha256_hex};

#[derive(Parser, Debug)]
#[command(name = "selrel", version, about = "Selective relevance for 3D-CNN video explanations")]
pub struct Cli {
    /// Worker threads for clip-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// File of `flag=value` lines supplying defaults for missing flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Explain one or more clip windows with a baseline method.
    Explain(commands::explain::Args),
    /// Temporal edge map, mask and selective relevance at one threshold.
    Select(commands::select::SelectArgs),
    /// `select` over an increasing list of thresholds.
    Sweep(commands::select::SweepArgs),
    /// Horn–Schunck flow of a clip window.
    Flow(commands::flow::Args),
    /// Motion precision, selectivity and agreement.
    Eval(commands::eval::Args),
    /// Time explanation, selective step and their combination.
    Bench(commands::bench::Args),
    /// Heatmap overlays and contact sheets.
    Render(commands::render::Args),
    /// Seeded synthetic inputs.
    #[command(subcommand)]
    Fixture(commands::fixture::FixtureCommand),
}

/// Parses `args` (including the program name), applies `--config`, and
/// runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = config::merge(args).context("stage `config` failed")?;
    let cli = Cli::try_parse_from(args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        anyhow::ensure!(n >= 1, "--workers must be >= 1");
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("stage `setup` failed")?;
    pool.install(|| commands::dispatch(cli.command))
}

/// Process entry point: prints errors and maps them to exit codes
/// (2 for usage errors, 1 otherwise).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(args) {
        Ok(()) => 0,
        Err(e) => match e.downcast_ref::<clap::Error>() {
            Some(ce) => {
                let _ = ce.print();
                if ce.use_stderr() {
                    2
                } else {
                    0
                }
            }
            None => {
                eprintln!("error: {e:#}");
                1
            }
        },
    }
}
