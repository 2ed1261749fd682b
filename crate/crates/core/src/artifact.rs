//! Versioned JSON artifacts (codebooks, PCA, models, reports, label maps).
//!
//! Every file carries `"version": 1`; anything else is rejected on read.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const ARTIFACT_VERSION: u64 = 1;

/// Serializes `value` with a leading `version` field.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::invalid(e.to_string()))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::invalid("artifact must serialize to a JSON object"))?;
    let mut out = serde_json::Map::new();
    out.insert("version".into(), ARTIFACT_VERSION.into());
    out.extend(std::mem::take(obj));
    serde_json::to_string_pretty(&out).map_err(|e| Error::invalid(e.to_string()))
}

pub fn from_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let mut v: serde_json::Value = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let obj = v.as_object_mut().ok_or_else(|| Error::Artifact {
        path: path.to_path_buf(),
        msg: "expected a JSON object".into(),
    })?;
    match obj.remove("version").and_then(|v| v.as_u64()) {
        Some(ARTIFACT_VERSION) => {}
        Some(other) => {
            return Err(Error::Artifact {
                path: path.to_path_buf(),
                msg: format!("stale artifact version {other}, expected {ARTIFACT_VERSION}"),
            })
        }
        None => {
            return Err(Error::Artifact {
                path: path.to_path_buf(),
                msg: "missing artifact version field".into(),
            })
        }
    }
    serde_json::from_value(v).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text, path)
}
