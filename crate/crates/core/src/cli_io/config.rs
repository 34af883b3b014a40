use crate::error::{Error, Result};

/// One `key = value` line of a flat config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parse `key = value` lines. Blank lines and lines starting with `#` are
/// ignored; keys may repeat, callers decide whether that is allowed.
pub fn parse_key_values(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{s}`"),
        })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Config {
                line,
                message: "empty key".into(),
            });
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

impl Entry {
    pub fn parse<T: std::str::FromStr>(&self) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value.parse().map_err(|e: T::Err| self.error(format!("bad value `{}`: {e}", self.value)))
    }

    pub fn parse_list<T: std::str::FromStr>(&self) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .split_whitespace()
            .map(|t| t.parse().map_err(|e: T::Err| self.error(format!("bad value `{t}`: {e}"))))
            .collect()
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line,
            message: format!("{}: {}", self.key, message.into()),
        }
    }
}
