//! Versioned, checksummed model container.
//!
//! Layout:
//!
//! ```text
//! TPDCOPOD <format version>\n
//! sha256 <hex digest of the payload>\n
//! <JSON payload>
//! ```
//!
//! Training columns are stored as base64 little-endian `f64` so the sorted
//! values (and every prediction made from them) survive a round trip bit for
//! bit.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Corruption, Error, Result};
use crate::pipeline::TpdModel;

pub const MAGIC: &str = "TPDCOPOD";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes(model: &TpdModel) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(model)
        .map_err(|e| Error::input(format!("cannot serialize model: {e}")))?;
    let digest = hex::encode(Sha256::digest(&payload));
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\nsha256 {digest}\n").into_bytes();
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<TpdModel> {
    let corrupt = |c| Error::CorruptModel(c);
    let (line1, rest) = split_line(bytes).ok_or(corrupt(Corruption::Header))?;
    let (line2, payload) = split_line(rest).ok_or(corrupt(Corruption::Header))?;

    let version = line1
        .strip_prefix(MAGIC)
        .and_then(|v| v.strip_prefix(' '))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or(corrupt(Corruption::Header))?;
    if version != FORMAT_VERSION {
        return Err(corrupt(Corruption::Version {
            found: version,
            expected: FORMAT_VERSION,
        }));
    }
    let digest = line2
        .strip_prefix("sha256 ")
        .ok_or(corrupt(Corruption::Header))?;
    if hex::encode(Sha256::digest(payload)) != digest {
        return Err(corrupt(Corruption::Checksum));
    }
    let model: TpdModel =
        serde_json::from_slice(payload).map_err(|e| corrupt(Corruption::Payload(e.to_string())))?;
    model
        .validate()
        .map_err(|e| corrupt(Corruption::Payload(e.to_string())))?;
    Ok(model)
}

fn split_line(bytes: &[u8]) -> Option<(&str, &[u8])> {
    let pos = bytes.iter().position(|&b| b == b'\n')?;
    let line = std::str::from_utf8(&bytes[..pos]).ok()?;
    Some((line, &bytes[pos + 1..]))
}

pub fn save_model(model: &TpdModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TpdModel> {
    from_bytes(&std::fs::read(path)?)
}

/// Serde adapter storing a `Vec<f64>` as base64 of its little-endian bytes.
pub(crate) mod f64_vec {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut bytes = Vec::with_capacity(v.len() * 8);
        for x in v {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        let bytes = STANDARD.decode(text.as_bytes()).map_err(D::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(D::Error::custom("f64 block length is not a multiple of 8"));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}
