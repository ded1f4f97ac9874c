//! Flat `key = value` configuration files.
//!
//! Keys are flag names without the leading dashes; `_` and `-` are
//! interchangeable. `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, (String, usize)>,
    source: String,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{source}:{line_no}: expected 'key = value', got '{line}'");
            };
            let key = normalize(key);
            if key.is_empty() {
                bail!("{source}:{line_no}: empty key");
            }
            if values.insert(key.clone(), (value.trim().to_string(), line_no)).is_some() {
                bail!("{source}:{line_no}: duplicate key '{key}'");
            }
        }
        Ok(Config { values, source: source.to_string() })
    }

    /// Rejects keys the subcommand does not know.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (key, (_, line)) in &self.values {
            if !allowed.contains(&key.as_str()) {
                bail!(
                    "{}:{line}: unknown key '{key}' (expected one of: {})",
                    self.source,
                    allowed.join(", ")
                );
            }
        }
        Ok(())
    }

    /// The flag value if given, else the parsed config value.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some((value, line)) => value
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("{}:{line}: bad value '{value}' for '{key}': {e}", self.source)),
        }
    }

    /// Boolean switch: set by the flag, or by `key = true` in the config.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

/// SNR list: `a,b,c`, `lo:hi` (1 dB steps) or `lo:hi:step`, inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrList(pub Vec<f64>);

impl FromStr for SnrList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let (lo, hi, step) = match parts.as_slice() {
                [lo, hi] => (num(lo)?, num(hi)?, 1.0),
                [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
                _ => return Err(format!("bad range '{s}', expected lo:hi or lo:hi:step")),
            };
            if !(step > 0.0) || hi < lo {
                return Err(format!("bad range '{s}'"));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=count).map(|i| lo + i as f64 * step).collect()
        } else {
            s.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
        };
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(format!("bad SNR list '{s}'"));
        }
        Ok(SnrList(values))
    }
}
