//! `--config` files: one `flag=value` pair per line, same grammar as
//! architecture files. Flags given on the command line win.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};
use selrel::kv::parse_lines;

/// Value of `--config` in `args`, if any.
fn config_path(args: &[OsString]) -> Result<Option<OsString>> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return match iter.next() {
                Some(v) => Ok(Some(v.clone())),
                None => bail!("--config needs a path"),
            };
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Ok(Some(v.into()));
        }
    }
    Ok(None)
}

fn has_flag(args: &[OsString], flag: &str) -> bool {
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&format!("{flag}="))
    })
}

/// Appends `--key value` for every config pair whose flag is absent.
/// `true` adds a bare switch, `false` adds nothing.
pub fn merge(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.to_string_lossy()))?;
    let lines = parse_lines(&text)?;
    for line in &lines {
        if line.head.is_some() || !line.bare.is_empty() {
            return Err(line.error("expected key=value pairs only").into());
        }
        for (key, value) in &line.pairs {
            if key == "config" {
                bail!("config files cannot include other config files");
            }
            let flag = format!("--{key}");
            if has_flag(&args, &flag) {
                continue;
            }
            match value.as_str() {
                "true" => args.push(flag.into()),
                "false" => {}
                _ => {
                    args.push(flag.into());
                    args.push(value.into());
                }
            }
        }
    }
    Ok(args)
}
