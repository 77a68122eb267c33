//! Latent blobs: a little-endian `u32` header length, a JSON header
//! `{"shape":[C,H,W],"dtype":"f32le"}`, then the raw values in channel-major
//! order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latent::{LatentGrid, LatentShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32le")]
    F32Le,
    #[serde(rename = "f64le")]
    F64Le,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32Le => 4,
            Dtype::F64Le => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlobError {
    #[error("blob is {0} bytes, too short for its header")]
    Truncated(usize),
    #[error("blob header is not valid JSON: {0}")]
    Header(String),
    #[error("blob header shape {shape:?} needs {expected} payload bytes, found {got}")]
    Payload {
        shape: [usize; 3],
        expected: usize,
        got: usize,
    },
    #[error("blob holds a non-finite value at index {0}")]
    NonFinite(usize),
}

#[derive(Serialize, Deserialize)]
struct Header {
    shape: [usize; 3],
    dtype: Dtype,
}

pub fn encode_blob(latent: &LatentGrid, dtype: Dtype) -> Vec<u8> {
    let s = latent.shape();
    let header = serde_json::to_vec(&Header {
        shape: [s.channels, s.height, s.width],
        dtype,
    })
    .expect("header serialises");
    let mut out = Vec::with_capacity(4 + header.len() + latent.values().len() * dtype.width());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for &v in latent.values() {
        match dtype {
            Dtype::F32Le => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64Le => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

pub fn decode_blob(bytes: &[u8]) -> Result<LatentGrid, BlobError> {
    let len_bytes: [u8; 4] = bytes
        .get(..4)
        .and_then(|b| b.try_into().ok())
        .ok_or(BlobError::Truncated(bytes.len()))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let header_bytes = bytes.get(4..4 + header_len).ok_or(BlobError::Truncated(bytes.len()))?;
    let header: Header = serde_json::from_slice(header_bytes).map_err(|e| BlobError::Header(e.to_string()))?;
    let payload = &bytes[4 + header_len..];
    let [c, h, w] = header.shape;
    let expected = c * h * w * header.dtype.width();
    if payload.len() != expected {
        return Err(BlobError::Payload {
            shape: header.shape,
            expected,
            got: payload.len(),
        });
    }
    let values: Vec<f64> = match header.dtype {
        Dtype::F32Le => payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect(),
        Dtype::F64Le => payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect(),
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(BlobError::NonFinite(i));
    }
    Ok(LatentGrid::from_vec(LatentShape::new(c, h, w), values).expect("length checked"))
}
