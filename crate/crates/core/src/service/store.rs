//! File-backed key-value store. Each value is one file:
//! `EPMB` magic, u64 little-endian payload length, SHA-256 of the payload,
//! then the JSON payload. Writes go to a temporary file that is renamed
//! into place, so a reader sees either the old value or the new one.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EPMB";
const HEADER: usize = 4 + 8 + 32;

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn check_key(key: &str) -> Result<()> {
    let ok = !key.is_empty() && key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(Error::invalid("key", format!("{key:?} is not a valid store key")))
    }
}

pub fn encode(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(payload));
    out.extend_from_slice(payload);
    out
}

/// Verifies framing and checksum, returning the payload.
pub fn decode<'a>(key: &str, bytes: &'a [u8]) -> Result<&'a [u8]> {
    let bad = |message: String| Error::Integrity {
        key: key.to_string(),
        message,
    };
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(bad("missing or short header".into()));
    }
    let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let payload = &bytes[HEADER..];
    if payload.len() != len {
        return Err(bad(format!("expected {len} payload bytes, found {}", payload.len())));
    }
    let sum = Sha256::digest(payload);
    if sum[..] != bytes[12..HEADER] {
        return Err(bad(format!(
            "checksum mismatch: stored {}, computed {}",
            hex::encode(&bytes[12..HEADER]),
            hex::encode(sum)
        )));
    }
    Ok(payload)
}

impl Store {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, ns: &str, key: &str) -> Result<PathBuf> {
        check_key(ns)?;
        check_key(key)?;
        Ok(self.root.join(ns).join(format!("{key}.epmb")))
    }

    pub fn put<T: Serialize + ?Sized>(&self, ns: &str, key: &str, value: &T) -> Result<()> {
        let path = self.path(ns, key)?;
        let dir = path.parent().expect("namespaced path");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&encode(&serde_json::to_vec(value)?))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// `Ok(None)` when the key is absent; an integrity error when the record is damaged.
    pub fn get<T: DeserializeOwned>(&self, ns: &str, key: &str) -> Result<Option<T>> {
        let path = self.path(ns, key)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let payload = decode(&format!("{ns}/{key}"), &bytes)?;
        Ok(Some(serde_json::from_slice(payload).map_err(|e| Error::Integrity {
            key: format!("{ns}/{key}"),
            message: e.to_string(),
        })?))
    }

    pub fn contains(&self, ns: &str, key: &str) -> Result<bool> {
        Ok(self.path(ns, key)?.exists())
    }

    /// Keys in a namespace, sorted.
    pub fn keys(&self, ns: &str) -> Result<Vec<String>> {
        check_key(ns)?;
        let dir = self.root.join(ns);
        let mut out = Vec::new();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            let name = entry?.file_name();
            if let Some(key) = name.to_str().and_then(|n| n.strip_suffix(".epmb")) {
                out.push(key.to_string());
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn file_path(&self, ns: &str, key: &str) -> Result<PathBuf> {
        self.path(ns, key)
    }
}
