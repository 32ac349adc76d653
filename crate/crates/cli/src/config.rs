//! Line-oriented `key = value` configuration files. Keys are normalized to
//! underscores, `#` starts a comment line, and unknown keys are rejected by
//! name. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                );
            };
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                bail!("{}:{}: empty key", path.display(), lineno + 1);
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("{}:{}: duplicate key `{key}`", path.display(), lineno + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                bail!("unknown configuration key `{key}`");
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    /// Parses a scalar value; the config supplies it only when the flag did
    /// not.
    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => match v.parse::<T>() {
                Ok(t) => Ok(Some(t)),
                Err(e) => bail!("config key `{key}`: cannot parse `{v}`: {e}"),
            },
        }
    }

    /// Comma-separated list; an empty value yields an empty list.
    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.values.get(key).map(|v| {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }
}

/// `flag.or(config)` with parse errors surfaced.
pub fn merge<T: std::str::FromStr>(flag: Option<T>, config: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => config.parse(key),
    }
}
