//! Plain-text `key = value` settings file. Command-line flags win over
//! entries in the file, which win over built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Keys accepted in a config file. Dashes and underscores are
/// interchangeable.
const KNOWN_KEYS: &[&str] = &[
    "n",
    "d",
    "quantile_mode",
    "lambda",
    "k",
    "eta",
    "max_iter",
    "tol_primal",
    "tol_dual",
    "fuse_eps",
    "standardize",
    "delta_lo",
    "delta_hi",
    "n_lambda",
    "lambda_min_ratio",
    "t_steps",
    "tau_lo",
    "tau_hi",
    "tau_steps",
];

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    source: String,
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{source}:{}: expected `key = value`", lineno + 1);
            };
            let key = normalize(key);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{source}:{}: unknown key `{key}`", lineno + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig {
            source: source.to_string(),
            values,
        })
    }

    /// `flag`, else the file entry for `key`, else `default`.
    pub fn pick<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.lookup(key, flag)?.unwrap_or(default))
    }

    /// `flag`, else the file entry for `key`, if either is present.
    pub fn lookup<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(&normalize(key)) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("{}: invalid value `{raw}` for `{key}`: {e}", self.source)),
            None => Ok(None),
        }
    }

    /// Boolean switch: set on the command line, or `true`/`false` in the file.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        self.pick(key, None, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let cfg = FileConfig::parse("# comment\nlambda = 0.5\ntol-primal=1e-3\n\nstandardize = true\n", "c").unwrap();
        assert_eq!(cfg.pick("lambda", None, 1.0).unwrap(), 0.5);
        assert_eq!(cfg.pick("lambda", Some(2.0), 1.0).unwrap(), 2.0);
        assert_eq!(cfg.pick("tol_primal", None, 1.0).unwrap(), 1e-3);
        assert_eq!(cfg.pick("eta", None, 1.0).unwrap(), 1.0);
        assert!(cfg.switch("standardize", false).unwrap());
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(FileConfig::parse("lambda 0.5\n", "c").is_err());
        assert!(FileConfig::parse("lambdaa = 0.5\n", "c").is_err());
        let cfg = FileConfig::parse("k = five\n", "c").unwrap();
        let err = cfg.pick::<usize>("k", None, 5).unwrap_err().to_string();
        assert!(err.contains("five"), "{err}");
    }
}
