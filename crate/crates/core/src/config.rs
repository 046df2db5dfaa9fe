//! `key=value` configuration file.
//!
//! ```text
//! # comment
//! instance_slug = cdp-seattle-21723dcf
//! store_root = /var/lib/councils/store
//! cache_root = /var/lib/councils/cache
//! port = 8080
//! recency_tau = 90
//! transcriber_cmd = whisper-cli --model base
//! ```

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}")]
    InvalidValue { line: usize, key: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub instance_slug: Option<String>,
    pub store_root: PathBuf,
    pub cache_root: PathBuf,
    pub port: u16,
    pub recency_tau: Option<f64>,
    pub transcriber_cmd: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            instance_slug: None,
            store_root: PathBuf::from("store"),
            cache_root: PathBuf::from("cache"),
            port: 8080,
            recency_tau: None,
            transcriber_cmd: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Parses config text. Blank lines and lines starting with `#` are
    /// ignored; later keys override earlier ones.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let invalid = || ConfigError::InvalidValue { line, key: key.to_string(), value: value.to_string() };
            let non_empty = || if value.is_empty() { None } else { Some(value.to_string()) };
            match key {
                "instance_slug" => config.instance_slug = non_empty(),
                "store_root" => config.store_root = PathBuf::from(non_empty().ok_or_else(invalid)?),
                "cache_root" => config.cache_root = PathBuf::from(non_empty().ok_or_else(invalid)?),
                "port" => config.port = value.parse().map_err(|_| invalid())?,
                "recency_tau" => {
                    config.recency_tau = match non_empty() {
                        None => None,
                        Some(v) => {
                            let tau: f64 = v.parse().map_err(|_| invalid())?;
                            if !(tau.is_finite() && tau > 0.0) {
                                return Err(invalid());
                            }
                            Some(tau)
                        }
                    }
                }
                "transcriber_cmd" => config.transcriber_cmd = non_empty(),
                _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
            }
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let c = Config::parse(
            "# deployment\ninstance_slug = cdp-seattle-21723dcf\nstore_root=/data/store\n\ncache_root = /data/cache\nport = 9000\nrecency_tau = 90\ntranscriber_cmd = asr --model base\n",
        )
        .unwrap();
        assert_eq!(c.instance_slug.as_deref(), Some("cdp-seattle-21723dcf"));
        assert_eq!(c.store_root, PathBuf::from("/data/store"));
        assert_eq!(c.port, 9000);
        assert_eq!(c.recency_tau, Some(90.0));
        assert_eq!(c.transcriber_cmd.as_deref(), Some("asr --model base"));
    }

    #[test]
    fn defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn errors() {
        assert!(matches!(Config::parse("port"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(Config::parse("\ncolour = red"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(Config::parse("port = http"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(Config::parse("recency_tau = -1"), Err(ConfigError::InvalidValue { .. })));
    }
}
