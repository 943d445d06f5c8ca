//! Line-oriented `head key=value ...` text shared by architecture and config
//! files. `#` starts a comment; blank lines are skipped.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KvLine {
    /// 1-based source line.
    pub line: usize,
    /// Leading bare token, if the line starts with one.
    pub head: Option<String>,
    pub pairs: Vec<(String, String)>,
    /// Bare tokens after the first `key=value` pair or after the head.
    pub bare: Vec<String>,
}

impl KvLine {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }
}

pub fn parse_lines(text: &str) -> Result<Vec<KvLine>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut line = KvLine {
            line: i + 1,
            head: None,
            pairs: Vec::new(),
            bare: Vec::new(),
        };
        for (j, tok) in body.split_whitespace().enumerate() {
            match tok.split_once('=') {
                Some((k, v)) => {
                    if k.is_empty() || v.is_empty() {
                        return Err(line.error(format!("malformed pair `{tok}`")));
                    }
                    if line.get(k).is_some() {
                        return Err(line.error(format!("duplicate key `{k}`")));
                    }
                    line.pairs.push((k.to_string(), v.to_string()));
                }
                None if j == 0 => line.head = Some(tok.to_string()),
                None => line.bare.push(tok.to_string()),
            }
        }
        out.push(line);
    }
    Ok(out)
}
