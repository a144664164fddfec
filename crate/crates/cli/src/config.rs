//! `key = value` configuration files. Keys are the long flag names, with
//! either `-` or `_` as separator; `#` starts a comment. Command-line flags
//! override file values.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim()
        .trim_start_matches("--")
        .replace('_', "-")
        .to_ascii_lowercase()
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(HarnessError::Config {
                    line: i + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = normalize(k);
            if key.is_empty() {
                return Err(HarnessError::Config {
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            let v = v.trim().trim_matches('"');
            values.insert(key, v.to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| HarnessError::Value {
                    key: key.to_string(),
                    value: v.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    /// Flag value if given, else the file value, else `default`.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Like [`resolve`](Self::resolve) without a default.
    pub fn resolve_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let cfg = ConfigFile::parse("# defaults\nsigma_w2 = 0.01\n--trials=50 # fewer\nseed = 7\n").unwrap();
        assert_eq!(cfg.get::<f64>("sigma-w2").unwrap(), Some(0.01));
        assert_eq!(cfg.resolve(None, "trials", 200usize).unwrap(), 50);
        assert_eq!(cfg.resolve(Some(300), "trials", 200usize).unwrap(), 300);
        assert_eq!(cfg.resolve(None, "r", 3.2).unwrap(), 3.2);
        assert_eq!(cfg.resolve_opt::<u64>(None, "seed").unwrap(), Some(7));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            ConfigFile::parse("trials 200"),
            Err(HarnessError::Config { line: 1, .. })
        ));
        let cfg = ConfigFile::parse("trials = many").unwrap();
        assert!(cfg.get::<usize>("trials").is_err());
    }
}
