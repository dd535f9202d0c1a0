//! Versioned JSON artifact files.
//!
//! Every file is an envelope carrying `format_version`, a `kind` tag and the
//! hash of the configuration that produced it, with the payload alongside.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: expected a `{expected}` file, found `{found}`")]
    WrongKind {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: unsupported format_version {found} (this build reads {FORMAT_VERSION})")]
    Version { path: String, found: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub format_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub payload: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, config_hash: &str, payload: T) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: kind.to_string(),
            config_hash: config_hash.to_string(),
            payload,
        }
    }
}

/// Hex SHA-256 prefix of the value's JSON encoding.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialize");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_json<T: Serialize>(kind: &str, config_hash: &str, payload: &T) -> String {
    let env = Envelope::new(kind, config_hash, payload);
    let mut text = serde_json::to_string_pretty(&env).expect("artifact serializes");
    text.push('\n');
    text
}

pub fn write_artifact<T: Serialize>(
    path: &Path,
    kind: &str,
    config_hash: &str,
    payload: &T,
) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::Fs {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, to_json(kind, config_hash, payload)).map_err(|source| IoError::Fs {
        path: path.display().to_string(),
        source,
    })
}

pub fn from_json<T: DeserializeOwned>(
    text: &str,
    kind: &str,
    path: &str,
) -> Result<Envelope<T>, IoError> {
    #[derive(Deserialize)]
    struct Header {
        format_version: u32,
        kind: String,
    }
    let header: Header = serde_json::from_str(text).map_err(|source| IoError::Parse {
        path: path.to_string(),
        source,
    })?;
    if header.format_version != FORMAT_VERSION {
        return Err(IoError::Version {
            path: path.to_string(),
            found: header.format_version,
        });
    }
    if header.kind != kind {
        return Err(IoError::WrongKind {
            path: path.to_string(),
            expected: kind.to_string(),
            found: header.kind,
        });
    }
    serde_json::from_str(text).map_err(|source| IoError::Parse {
        path: path.to_string(),
        source,
    })
}

pub fn read_artifact<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Envelope<T>, IoError> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| IoError::Fs {
        path: shown.clone(),
        source,
    })?;
    from_json(&text, kind, &shown)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_checks_kind_and_version() {
        let text = to_json("instance", "abc", &vec![1, 2, 3]);
        let env: Envelope<Vec<i32>> = from_json(&text, "instance", "mem").unwrap();
        assert_eq!(env.payload, vec![1, 2, 3]);
        assert_eq!(env.format_version, 1);
        assert!(matches!(
            from_json::<Vec<i32>>(&text, "schedule", "mem"),
            Err(IoError::WrongKind { .. })
        ));
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(
            from_json::<Vec<i32>>(&bumped, "instance", "mem"),
            Err(IoError::Version { found: 2, .. })
        ));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash(&(1, "a")), config_hash(&(1, "a")));
        assert_ne!(config_hash(&(1, "a")), config_hash(&(2, "a")));
        assert_eq!(config_hash(&0).len(), 16);
    }
}
