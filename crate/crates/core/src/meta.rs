//! `key=value` sidecar records written next to every artifact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::parse_lines;

/// Ordered key/value pairs. Keys are unique; values contain no whitespace
/// and no `#`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sidecar {
    entries: Vec<(String, String)>,
}

fn check_token(s: &str, what: &str) -> Result<()> {
    if s.is_empty() || s.contains(|c: char| c.is_whitespace() || c == '#') {
        return Err(Error::input(format!("invalid sidecar {what} `{s}`")));
    }
    Ok(())
}

impl Sidecar {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an existing value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<&mut Self> {
        let value = value.to_string();
        check_token(key, "key")?;
        if key.contains('=') {
            return Err(Error::input(format!("invalid sidecar key `{key}`")));
        }
        check_token(&value, "value")?;
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        Ok(self)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Sidecar::new();
        for line in parse_lines(text)? {
            if line.head.is_some() || !line.bare.is_empty() || line.pairs.len() != 1 {
                return Err(line.error("expected exactly one key=value pair"));
            }
            let (k, v) = &line.pairs[0];
            if out.get(k).is_some() {
                return Err(line.error(format!("duplicate key `{k}`")));
            }
            out.set(k, v).map_err(|e| line.error(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Sidecar::parse(&fs::read_to_string(path)?)
    }
}
