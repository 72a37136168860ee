//! Setting resolution: command-line flag, then `key = value` config file,
//! then the built-in default. Every resolved value is recorded so it can be
//! echoed into the run summary.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-")
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            if values.insert(normalize(k), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{}`", i + 1, k.trim())));
            }
        }
        Ok(ConfigFile { values })
    }
}

/// Resolves settings for one command and keeps the audit trail.
#[derive(Debug)]
pub struct Resolver {
    file: ConfigFile,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(Resolver { file, resolved: BTreeMap::new() })
    }

    pub fn from_file(file: ConfigFile) -> Self {
        Resolver { file, resolved: BTreeMap::new() }
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.values.get(key) {
                Some(text) => text
                    .parse()
                    .map_err(|e| CliError::Config(format!("`{key}` = `{text}`: {e}")))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`Resolver::get`] for settings without a default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.values.get(key) {
                Some(text) => Some(
                    text.parse()
                        .map_err(|e| CliError::Config(format!("`{key}` = `{text}`: {e}")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Fails on config keys that no setting consumed (usually typos).
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(k) = self.file.values.keys().find(|k| !self.resolved.contains_key(*k)) {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        Ok(self.resolved)
    }
}

/// Comma-separated list setting, e.g. `0,0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|e: T::Err| format!("`{x}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .and_then(|v: Vec<T>| if v.is_empty() { Err("empty list".into()) } else { Ok(List(v)) })
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}
