//! Shared plumbing for persisted artifacts: content hashes, JSON files and
//! the extended-real encoding used for infinite scores.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex SHA-256 of a byte string.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&bytes))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact types always serialize");
    bytes.push(b'\n');
    bytes
}

/// Writes `value` as pretty JSON and returns the content hash of what was
/// written.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let bytes = to_json_bytes(value);
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&bytes))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

/// Serde adapter for `f64` values that may be infinite: finite values are
/// plain JSON numbers, infinities are the strings `"inf"` and `"-inf"`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number, \"inf\" or \"-inf\", got {s:?}"
            ))),
        }
    }

    /// Newtype for use inside collections.
    #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
    #[serde(transparent)]
    pub struct ExtReal(#[serde(with = "self")] pub f64);
}

#[cfg(test)]
mod tests {
    use super::ext_real::ExtReal;
    use super::*;

    #[test]
    fn ext_real_encoding() {
        let v = vec![ExtReal(1.5), ExtReal(f64::INFINITY), ExtReal(f64::NEG_INFINITY)];
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"[1.5,"inf","-inf"]"#);
        let back: Vec<ExtReal> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<ExtReal>("\"nan\"").is_err());
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            content_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
