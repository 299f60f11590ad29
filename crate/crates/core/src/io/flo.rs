//! Middlebury `.flo`: magic 202021.25, width, height, then interleaved
//! `(u, v)` floats row-major. Little-endian throughout.

use crate::error::{Error, Result};
use crate::raster::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(12 + 8 * w * h);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for [du, dv] in flow.vectors() {
        out.extend_from_slice(&(*du as f32).to_le_bytes());
        out.extend_from_slice(&(*dv as f32).to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    let word = |k: usize| -> Result<[u8; 4]> {
        bytes
            .get(4 * k..4 * k + 4)
            .map(|b| [b[0], b[1], b[2], b[3]])
            .ok_or(Error::Parse { offset: bytes.len(), message: "header truncated".into() })
    };
    let magic = f32::from_le_bytes(word(0)?);
    if magic != FLO_MAGIC {
        return Err(Error::Format(format!("bad .flo magic {magic}")));
    }
    let dim = |k: usize| -> Result<usize> {
        let n = i32::from_le_bytes(word(k)?);
        usize::try_from(n)
            .ok()
            .filter(|&n| n > 0)
            .ok_or(Error::Parse { offset: 4 * k, message: format!("bad dimension {n}") })
    };
    let (w, h) = (dim(1)?, dim(2)?);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .ok_or(Error::Parse { offset: 4, message: "dimensions overflow".into() })?;
    let payload = &bytes[12..];
    if payload.len() != expected {
        return Err(Error::Parse {
            offset: 12 + payload.len().min(expected),
            message: format!("payload has {} bytes, expected {expected}", payload.len()),
        });
    }
    let floats: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    FlowField::new(w, h, floats.chunks_exact(2).map(|p| [p[0], p[1]]).collect())
}
