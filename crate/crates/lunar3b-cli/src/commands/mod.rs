//! Command implementations and their shared plumbing.
//!
//! Every command follows the same pattern: read its documented keys from
//! the [`RunConfig`], call [`RunConfig::finish`] so unknown keys fail
//! before any computation, run the library, and write CSV/JSON results
//! into the output directory.  Outcomes map onto process exit codes:
//!
//! * `0` — success (for `verify`: every check passed);
//! * `1` — a verification check failed;
//! * `2` — configuration error (bad file, bad value, unknown key);
//! * `3` — physically inadmissible input rejected by the library.

pub mod average;
pub mod portrait;
pub mod simulate;
pub mod torsion;
pub mod verify;

use std::fmt;

use lunar3b::threebody::MassConfig;

use crate::config::{ConfigError, RunConfig};

/// Failure modes, mapped to process exit codes by [`CmdError::exit_code`].
#[derive(Debug)]
pub enum CmdError {
    /// Malformed or inconsistent configuration.
    Config(String),
    /// Physically inadmissible input rejected by the library.
    Domain(lunar3b::Error),
    /// Filesystem problem while writing results.
    Io(std::io::Error),
}

impl CmdError {
    /// The process exit code this failure maps to.
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Config(_) | CmdError::Io(_) => 2,
            CmdError::Domain(_) => 3,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config(msg) => write!(f, "configuration: {msg}"),
            CmdError::Domain(e) => write!(f, "{e}"),
            CmdError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.0)
    }
}

impl From<lunar3b::Error> for CmdError {
    fn from(e: lunar3b::Error) -> Self {
        CmdError::Domain(e)
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

/// Successful command outcome carrying the exit code (`0`, or `1` when a
/// verification check failed).
pub type CmdResult = Result<u8, CmdError>;

/// Mass configuration from the `m0`, `m1`, `m2` keys.
///
/// Either all three masses are given or none are; the default triple is
/// `(1, 0.8, 1.3)`.  A partial triple or a non-positive mass is a
/// configuration error.
pub fn mass_config(cfg: &RunConfig) -> Result<MassConfig, CmdError> {
    let m0 = cfg.get_f64_opt("m0")?;
    let m1 = cfg.get_f64_opt("m1")?;
    let m2 = cfg.get_f64_opt("m2")?;
    match (m0, m1, m2) {
        (None, None, None) => Ok(MassConfig::new(1.0, 0.8, 1.3).expect("default masses")),
        (Some(a), Some(b), Some(c)) => {
            MassConfig::new(a, b, c).map_err(|e| CmdError::Config(format!("invalid masses: {e}")))
        }
        _ => {
            let missing: Vec<&str> = [("m0", m0), ("m1", m1), ("m2", m2)]
                .iter()
                .filter(|(_, v)| v.is_none())
                .map(|(k, _)| *k)
                .collect();
            Err(CmdError::Config(format!(
                "mass configuration requires all of m0, m1, m2; missing {}",
                missing.join(", ")
            )))
        }
    }
}

/// Reject a scaling-fit ratio list that is not strictly decreasing.
pub fn require_strictly_decreasing(values: &[f64], key: &str) -> Result<(), CmdError> {
    if values.windows(2).all(|w| w[0] > w[1]) {
        Ok(())
    } else {
        Err(CmdError::Config(format!(
            "key `{key}` must be a strictly decreasing list, got {values:?}"
        )))
    }
}

/// Reject non-positive or non-finite list entries.
pub fn require_positive(values: &[f64], key: &str) -> Result<(), CmdError> {
    for &v in values {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CmdError::Config(format!(
                "key `{key}` requires positive finite values, got {v}"
            )));
        }
    }
    Ok(())
}
