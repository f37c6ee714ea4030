//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the long
//! flag names with underscores, e.g. `hidden_dim = 32`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::CliError;

pub const KNOWN_KEYS: [&str; 19] = [
    "corpus_dir",
    "dataset_path",
    "key_model_path",
    "model_path",
    "output_path",
    "log_path",
    "overlap_threshold",
    "voicing_threshold",
    "seq_len",
    "hidden_dim",
    "num_layers",
    "dropout_rate",
    "learning_rate",
    "batch_size",
    "epochs",
    "seed",
    "per_key",
    "held_out_fraction",
    "trials",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        ConfigFile::parse(&text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))),
        }
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Like [`resolve`](Self::resolve) for a setting with no default.
    pub fn require_path(&self, flag: Option<PathBuf>, key: &str, flag_name: &str) -> Result<PathBuf, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => self.get(key)?.ok_or_else(|| CliError::Usage(format!("missing --{flag_name} (or {key} in the config file)"))),
        }
    }
}
