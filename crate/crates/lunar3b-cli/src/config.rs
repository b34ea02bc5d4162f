//! Flat `key = value` run configuration.
//!
//! One assignment per line; blank lines and lines starting with `#` are
//! skipped.  Keys are case-sensitive; values are free-form strings
//! interpreted by the typed accessors below, with lists written as
//! comma-separated numbers.  Every key present in the file must be
//! consumed by the selected command: after reading its keys each command
//! calls [`RunConfig::finish`], which reports any leftovers as errors so
//! a typo fails the run loudly instead of silently falling back to a
//! default.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

/// Configuration problem: unreadable file, parse failure, bad value, or
/// unknown key.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parsed key/value store that tracks which keys have been consumed.
#[derive(Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl RunConfig {
    /// Configuration with no assignments: every accessor returns its
    /// default.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Parse a configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    i + 1
                )));
            };
            let key = key.trim().to_owned();
            if key.is_empty() {
                return Err(ConfigError(format!("line {}: empty key", i + 1)));
            }
            if values
                .insert(key.clone(), value.trim().to_owned())
                .is_some()
            {
                return Err(ConfigError(format!(
                    "line {}: duplicate key `{key}`",
                    i + 1
                )));
            }
        }
        Ok(Self {
            values,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_owned());
        self.values.get(key).map(String::as_str)
    }

    /// Floating-point value with a default.
    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(text) => text.parse().map_err(|_| {
                ConfigError(format!("key `{key}`: invalid number `{text}`"))
            }),
        }
    }

    /// Floating-point value that may be absent.
    pub fn get_f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("key `{key}`: invalid number `{text}`"))),
        }
    }

    /// Unsigned integer value with a default.
    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(text) => text.parse().map_err(|_| {
                ConfigError(format!("key `{key}`: invalid integer `{text}`"))
            }),
        }
    }

    /// Boolean value with a default; accepts `true/false`, `yes/no`,
    /// `1/0`.
    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some("false") | Some("no") | Some("0") => Ok(false),
            Some(text) => Err(ConfigError(format!(
                "key `{key}`: invalid boolean `{text}` (use true/false)"
            ))),
        }
    }

    /// Comma-separated list of floats with a default.
    pub fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(text) => text
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    item.parse().map_err(|_| {
                        ConfigError(format!(
                            "key `{key}`: invalid number `{item}` in list"
                        ))
                    })
                })
                .collect(),
        }
    }

    /// Fail if any configured key was never consumed by the command.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| !used.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(format!(
                "unknown configuration keys for this command: {}",
                unknown.join(", ")
            )))
        }
    }
}
