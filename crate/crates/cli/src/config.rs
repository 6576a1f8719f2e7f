//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are skipped. Keys use the long
//! flag names with `-` or `_` interchangeably.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// A problem with how the program was invoked.
#[derive(Debug)]
pub struct Usage(pub String);

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Usage> {
        let text = fs::read_to_string(path)
            .map_err(|e| Usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|m| Usage(format!("config {}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            values.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self { values })
    }

    fn lookup<T: FromStr>(&self, key: &str) -> Result<Option<T>, Usage>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Usage(format!("config key {key}: {e}"))),
        }
    }

    /// Flag value, else the config value, else nothing.
    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Usage>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.lookup(key),
        }
    }

    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Usage>
    where
        T::Err: Display,
    {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, Usage>
    where
        T::Err: Display,
    {
        self.pick_opt(flag, key)?
            .ok_or_else(|| Usage(format!("missing required --{}", key.replace('_', "-"))))
    }

    /// Comma-separated list; an empty flag list counts as not given.
    pub fn pick_list<T: FromStr>(
        &self,
        flag: Vec<T>,
        key: &str,
        default: Vec<T>,
    ) -> Result<Vec<T>, Usage>
    where
        T::Err: Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|e| Usage(format!("config key {key}: {e}")))
                })
                .collect(),
        }
    }
}
