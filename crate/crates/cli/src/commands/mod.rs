pub mod bench;
pub mod eval;
pub mod explain;
pub mod fixture;
pub mod flow;
pub mod render;
pub mod select;

use anyhow::{Context, Result};

use crate::Command;

pub fn dispatch(command: Command) -> Result<()> {
    let (stage, result) = match command {
        Command::Explain(a) => ("explain", explain::run(a)),
        Command::Select(a) => ("select", select::run(a)),
        Command::Sweep(a) => ("sweep", select::sweep(a)),
        Command::Flow(a) => ("flow", flow::run(a)),
        Command::Eval(a) => ("eval", eval::run(a)),
        Command::Bench(a) => ("bench", bench::run(a)),
        Command::Render(a) => ("render", render::run(a)),
        Command::Fixture(a) => ("fixture", fixture::run(a)),
    };
    result.with_context(|| format!("stage `{stage}` failed"))
}

/// Parses a comma-separated list.
pub(crate) fn split_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().with_context(|| format!("bad list item `{p}`")))
        .collect()
}
