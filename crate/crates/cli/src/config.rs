//! Config files, flag precedence and exit-code mapping.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_PROPERTY: u8 = 3;

pub const PARALLELISM_ENV: &str = "DRIFTSCOPE_PARALLELISM";

/// A usage or configuration problem (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<toml::de::Error>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<driftscope_core::Error>() {
            return if e.is_config_error() { EXIT_CONFIG } else { EXIT_DATA };
        }
    }
    EXIT_DATA
}

/// Parse an optional TOML config file; absent path yields the default.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    path.map_or_else(|| Ok(T::default()), load_file)
}

pub fn load_file<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Flag value, else config value, else an error naming the flag.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or(file).ok_or_else(|| usage(format!("missing required --{name} (flag or config key)")))
}

pub fn required_path(flag: Option<PathBuf>, file: Option<PathBuf>, name: &str) -> anyhow::Result<PathBuf> {
    required(flag, file, name)
}

/// Flag, then config, then the environment, then 0 (all cores).
pub fn parallelism(flag: Option<usize>, file: Option<usize>) -> anyhow::Result<usize> {
    if let Some(p) = flag.or(file) {
        return Ok(p);
    }
    match std::env::var(PARALLELISM_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{PARALLELISM_ENV}={v} is not a thread count"))),
        _ => Ok(0),
    }
}

pub fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// `<path>.<suffix>`, keeping the original extension.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}
