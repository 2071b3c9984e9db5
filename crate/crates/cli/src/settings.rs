//! Layered `key=value` settings: defaults, then a config file, then flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

/// Flag spelling uses dashes, file keys use underscores; both map here.
fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value, got {line:?}", i + 1))?;
            if k.trim().is_empty() {
                bail!("line {}: empty key", i + 1);
            }
            s.set(k, v.trim());
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(normalize_key(key), value.to_string());
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Overlay `KEY=VALUE` pairs given on the command line.
    pub fn set_pairs(&mut self, pairs: &[String]) -> Result<()> {
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {p:?}"))?;
            self.set(k, v.trim());
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    pub fn take_parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("invalid value {v:?} for {key}: {e}")),
        }
    }

    /// Error naming every absent key at once.
    pub fn require(&self, keys: &[&str]) -> Result<()> {
        let missing: Vec<&str> = keys.iter().copied().filter(|k| !self.map.contains_key(*k)).collect();
        if !missing.is_empty() {
            bail!(
                "missing required setting(s): {} (give them as flags or in --config)",
                missing.join(", ")
            );
        }
        Ok(())
    }

    pub fn drain(&mut self) -> impl Iterator<Item = (String, String)> {
        std::mem::take(&mut self.map).into_iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let s = Settings::parse("# header\nsteps = 10  # inline\n\nmeta-step=1e-3\n").unwrap();
        assert_eq!(s.get("steps"), Some("10"));
        assert_eq!(s.get("meta_step"), Some("1e-3"));
    }

    #[test]
    fn later_layers_win() {
        let mut s = Settings::parse("steps=10\nruns=2").unwrap();
        s.set_opt("steps", Some(20));
        s.set_opt::<u64>("runs", None);
        assert_eq!(s.get("steps"), Some("20"));
        assert_eq!(s.get("runs"), Some("2"));
    }

    #[test]
    fn malformed_line_names_its_number() {
        let err = Settings::parse("steps=1\noops\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn all_missing_keys_reported() {
        let s = Settings::parse("runs=1").unwrap();
        let err = s.require(&["algorithm", "runs", "steps"]).unwrap_err().to_string();
        assert!(err.contains("algorithm, steps"), "{err}");
    }
}
