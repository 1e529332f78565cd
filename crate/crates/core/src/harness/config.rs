use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed `key = value` file. Blank lines and `#` comments are skipped;
/// keys must be known and appear once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, (String, usize)>,
}

fn line_err<T>(line: usize, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::InvalidArgument(format!("config line {line}: {msg}")))
}

impl KeyValueConfig {
    pub fn parse(text: &str, known: &[&str]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return line_err(line, format!("expected key = value, got {content:?}"));
            };
            let (key, value) = (key.trim(), value.trim());
            if !known.contains(&key) {
                return line_err(line, format!("unknown key {key:?}"));
            }
            if value.is_empty() {
                return line_err(line, format!("empty value for {key:?}"));
            }
            if let Some((_, first)) = entries.get(key) {
                return line_err(line, format!("duplicate key {key:?} (first set on line {first})"));
            }
            entries.insert(key.to_owned(), (value.to_owned(), line));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Typed value of `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .or_else(|e| line_err(*line, format!("bad value {v:?} for {key:?}: {e}"))),
        }
    }

    /// Comma-separated list value of `key`, if present.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .or_else(|e| line_err(*line, format!("bad item {item:?} for {key:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}
