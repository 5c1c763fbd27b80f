//! Service configuration, read from a TOML file.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! database = "esem.db"
//! blob_dir = "blobs"
//! upload_limit = 10485760
//! session_ttl_secs = 28800
//! default_threshold = "4/5"
//! certificate_template = "certificate.html"   # optional
//! ui_dir = "ui"                               # optional
//! inspection = false
//!
//! [password]
//! memory_kib = 19456
//! iterations = 2
//!
//! [retry]
//! max_attempts = 3
//! base_delay_secs = 5
//!
//! [mail]
//! mode = "smtp"          # or "capture"
//! host = "smtp.example.org"
//! port = 587
//! username = "esem"
//! password = "secret"
//! from = "e-Sem <noreply@example.org>"
//! security = "starttls"  # "none", "starttls" or "tls"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::domain::Threshold;
use crate::notifier::{RetryPolicy, SmtpSettings};
use crate::persistence::{PasswordCost, StoreConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration in {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MailConfig {
    /// Keep messages in memory; used for development and tests.
    Capture,
    Smtp(SmtpSettings),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct PasswordSection {
    memory_kib: u32,
    iterations: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RetrySection {
    #[serde(default = "default_attempts")]
    max_attempts: u32,
    #[serde(default = "default_base_delay")]
    base_delay_secs: u64,
}

fn default_attempts() -> u32 {
    RetryPolicy::default().max_attempts
}

fn default_base_delay() -> u64 {
    RetryPolicy::default().base_delay.as_secs()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    listen: Option<SocketAddr>,
    database: Option<PathBuf>,
    blob_dir: Option<PathBuf>,
    upload_limit: Option<u64>,
    session_ttl_secs: Option<u64>,
    default_threshold: Option<Threshold>,
    certificate_template: Option<PathBuf>,
    ui_dir: Option<PathBuf>,
    #[serde(default)]
    inspection: bool,
    password: Option<PasswordSection>,
    retry: Option<RetrySection>,
    mail: Option<MailConfig>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub listen: SocketAddr,
    pub database: PathBuf,
    pub blob_dir: PathBuf,
    pub upload_limit: u64,
    pub session_ttl: Duration,
    pub default_threshold: Threshold,
    pub password_cost: PasswordCost,
    pub certificate_template: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    /// Exposes the captured outbox over HTTP. Only honoured with capture mail.
    pub inspection: bool,
    pub retry: RetryPolicy,
    pub mail: MailConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            database: PathBuf::from("esem.db"),
            blob_dir: PathBuf::from("blobs"),
            upload_limit: 10 * 1024 * 1024,
            session_ttl: Duration::from_secs(8 * 60 * 60),
            default_threshold: Threshold::FOUR_FIFTHS,
            password_cost: PasswordCost::default(),
            certificate_template: None,
            ui_dir: None,
            inspection: false,
            retry: RetryPolicy::default(),
            mail: MailConfig::Capture,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    /// Parses TOML text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::new(),
            source,
        })?;
        let d = Config::default();
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let upload_limit = raw.upload_limit.unwrap_or(d.upload_limit);
        if upload_limit == 0 {
            return Err(ConfigError::Invalid("upload_limit must be positive".into()));
        }
        let session_ttl = raw.session_ttl_secs.map(Duration::from_secs).unwrap_or(d.session_ttl);
        if session_ttl.is_zero() {
            return Err(ConfigError::Invalid("session_ttl_secs must be positive".into()));
        }
        let retry = match raw.retry {
            Some(r) if r.max_attempts == 0 => {
                return Err(ConfigError::Invalid("retry.max_attempts must be at least 1".into()))
            }
            Some(r) => RetryPolicy {
                max_attempts: r.max_attempts,
                base_delay: Duration::from_secs(r.base_delay_secs),
            },
            None => d.retry,
        };
        Ok(Config {
            listen: raw.listen.unwrap_or(d.listen),
            database: resolve(raw.database.unwrap_or(d.database)),
            blob_dir: resolve(raw.blob_dir.unwrap_or(d.blob_dir)),
            upload_limit,
            session_ttl,
            default_threshold: raw.default_threshold.unwrap_or(d.default_threshold),
            password_cost: raw
                .password
                .map(|p| PasswordCost {
                    memory_kib: p.memory_kib,
                    iterations: p.iterations,
                })
                .unwrap_or(d.password_cost),
            certificate_template: raw.certificate_template.map(resolve),
            ui_dir: raw.ui_dir.map(resolve),
            inspection: raw.inspection,
            retry,
            mail: raw.mail.unwrap_or(d.mail),
        })
    }

    pub fn store_config(&self) -> StoreConfig {
        StoreConfig {
            db_path: self.database.clone(),
            blob_dir: self.blob_dir.clone(),
            upload_limit: self.upload_limit,
            password_cost: self.password_cost,
            default_threshold: self.default_threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notifier::SmtpSecurity;

    #[test]
    fn empty_file_gives_defaults_under_base() {
        let c = Config::parse("", Path::new("/srv/esem")).unwrap();
        assert_eq!(c.database, Path::new("/srv/esem/esem.db"));
        assert_eq!(c.blob_dir, Path::new("/srv/esem/blobs"));
        assert_eq!(c.default_threshold, Threshold::FOUR_FIFTHS);
        assert_eq!(c.mail, MailConfig::Capture);
        assert!(!c.inspection);
    }

    #[test]
    fn full_file() {
        let text = r#"
            listen = "0.0.0.0:9000"
            database = "/var/lib/esem/db.sqlite"
            blob_dir = "files"
            upload_limit = 2048
            session_ttl_secs = 60
            default_threshold = "3/4"
            certificate_template = "cert.html"
            inspection = true

            [password]
            memory_kib = 1024
            iterations = 1

            [retry]
            max_attempts = 5

            [mail]
            mode = "smtp"
            host = "mail.example.org"
            port = 2525
            from = "noreply@example.org"
            security = "none"
        "#;
        let c = Config::parse(text, Path::new("/etc/esem")).unwrap();
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.database, Path::new("/var/lib/esem/db.sqlite"));
        assert_eq!(c.blob_dir, Path::new("/etc/esem/files"));
        assert_eq!(c.certificate_template.as_deref(), Some(Path::new("/etc/esem/cert.html")));
        assert_eq!(c.default_threshold, Threshold::new(3, 4).unwrap());
        assert_eq!(c.password_cost.memory_kib, 1024);
        assert_eq!(c.retry.max_attempts, 5);
        assert_eq!(c.retry.base_delay, Duration::from_secs(5));
        match c.mail {
            MailConfig::Smtp(s) => {
                assert_eq!(s.port, Some(2525));
                assert_eq!(s.security, SmtpSecurity::None);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "unknown_key = 1",
            "default_threshold = \"5/4\"",
            "upload_limit = 0",
            "session_ttl_secs = 0",
            "[retry]\nmax_attempts = 0",
            "[mail]\nmode = \"pigeon\"",
        ] {
            assert!(Config::parse(text, Path::new(".")).is_err(), "{text}");
        }
    }
}
