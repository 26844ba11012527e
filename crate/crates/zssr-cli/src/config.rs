//! Error classification for exit codes, and the `--config` key-value file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Split of failures into the two nonzero exit codes: bad invocations
/// exit 1, everything the outside world causes exits 2.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Runtime(zssr_core::Error),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(msg) => f.write_str(msg),
            AppError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<zssr_core::Error> for AppError {
    fn from(e: zssr_core::Error) -> Self {
        AppError::Runtime(e)
    }
}

pub type AppResult<T> = Result<T, AppError>;

pub fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

/// Values from a `--config` file. Keys mirror long flag names; command
/// line flags take precedence over entries here.
#[derive(Debug, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
    path: PathBuf,
}

impl ConfigMap {
    pub fn empty() -> Self {
        ConfigMap::default()
    }

    /// Parse `key = value` lines; `#` starts a comment, blank lines are
    /// skipped.
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Runtime(zssr_core::Error::io(path, e)))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "{}: line {}: expected key=value, got {:?}",
                    path.display(),
                    lineno + 1,
                    line
                ))
            })?;
            let key = key.trim().to_string();
            if entries.contains_key(&key) {
                return Err(usage(format!(
                    "{}: line {}: duplicate key {:?}",
                    path.display(),
                    lineno + 1,
                    key
                )));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(ConfigMap {
            entries,
            path: path.to_path_buf(),
        })
    }

    /// Load when a path was given, empty otherwise.
    pub fn load_opt(path: Option<&Path>) -> AppResult<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::empty()),
        }
    }

    /// Typos must not silently change an experiment, so any key outside
    /// the command's flag set is an error.
    pub fn ensure_known(&self, allowed: &[&str]) -> AppResult<()> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(usage(format!(
                    "{}: unknown key {:?} (allowed: {})",
                    self.path.display(),
                    key,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> AppResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| {
                usage(format!(
                    "{}: key {:?}: cannot parse {:?}: {}",
                    self.path.display(),
                    key,
                    raw,
                    e
                ))
            }),
        }
    }

    /// Boolean keys: absent means false.
    pub fn get_flag(&self, key: &str) -> AppResult<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}
