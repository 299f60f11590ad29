//! Portable Float Map: `Pf` (one channel) or `PF` (three channels), rows
//! stored bottom-to-top, 32-bit floats. NaN marks an invalid pixel.

use crate::dynamic::NormalMap;
use crate::error::{Error, Result};
use crate::raster::DepthField;

use super::header::HeaderReader;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

/// Float raster as stored on disk, rows top-to-bottom in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Format(format!("PFM holds 1 or 3 channels, not {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "{} floats for a {width}x{height}x{channels} map",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Invalid pixels are written as NaN.
    pub fn from_depth(depth: &DepthField) -> Self {
        let (w, h) = depth.dims();
        let data = (0..depth.len())
            .map(|i| if depth.is_valid(i) { depth.values()[i] as f32 } else { f32::NAN })
            .collect();
        Self { width: w, height: h, channels: 1, data }
    }

    /// NaN, non-positive and infinite values read back as invalid.
    pub fn to_depth(&self) -> Result<DepthField> {
        if self.channels != 1 {
            return Err(Error::Format("depth needs a single-channel PFM".into()));
        }
        DepthField::from_values(self.width, self.height, self.data.iter().map(|&x| f64::from(x)).collect())
    }

    /// Normals as three planes (x, y, z); invalid normals are NaN.
    pub fn from_normals(normals: &NormalMap) -> Self {
        let data = normals
            .normals
            .iter()
            .zip(&normals.valid)
            .flat_map(|(n, ok)| if *ok { [n.x as f32, n.y as f32, n.z as f32] } else { [f32::NAN; 3] })
            .collect();
        Self { width: normals.width, height: normals.height, channels: 3, data }
    }
}

pub fn encode_pfm(img: &PfmImage, order: ByteOrder) -> Vec<u8> {
    let (magic, scale) = match (img.channels, order) {
        (1, ByteOrder::Little) => ("Pf", "-1.0"),
        (1, ByteOrder::Big) => ("Pf", "1.0"),
        (_, ByteOrder::Little) => ("PF", "-1.0"),
        (_, ByteOrder::Big) => ("PF", "1.0"),
    };
    let mut out = format!("{magic}\n{} {}\n{scale}\n", img.width, img.height).into_bytes();
    let row = img.width * img.channels;
    out.reserve(img.data.len() * 4);
    for v in (0..img.height).rev() {
        for &x in &img.data[v * row..(v + 1) * row] {
            match order {
                ByteOrder::Little => out.extend_from_slice(&x.to_le_bytes()),
                ByteOrder::Big => out.extend_from_slice(&x.to_be_bytes()),
            }
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<PfmImage> {
    let mut hdr = HeaderReader::new(bytes);
    let (at, magic) = hdr.token()?;
    let channels = match magic {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::Parse { offset: at, message: format!("unknown PFM magic {other:?}") }),
    };
    let width = hdr.dimension()?;
    let height = hdr.dimension()?;
    let (at, scale) = hdr.token()?;
    let scale: f64 = scale
        .parse()
        .map_err(|_| Error::Parse { offset: at, message: format!("bad scale {scale:?}") })?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Parse { offset: at, message: "scale must be finite and non-zero".into() });
    }
    let order = if scale < 0.0 { ByteOrder::Little } else { ByteOrder::Big };
    let start = hdr.end_of_header()?;

    let row = width * channels;
    let expected = row
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or(Error::Parse { offset: start, message: "dimensions overflow".into() })?;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("payload truncated: {} of {expected} bytes", payload.len()),
        });
    }
    if payload.len() > expected {
        return Err(Error::Parse { offset: start + expected, message: "trailing bytes after payload".into() });
    }
    let mut data = vec![0f32; row * height];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let x = match order {
            ByteOrder::Little => f32::from_le_bytes(b),
            ByteOrder::Big => f32::from_be_bytes(b),
        };
        let (file_row, col) = (k / row, k % row);
        data[(height - 1 - file_row) * row + col] = x;
    }
    PfmImage::new(width, height, channels, data)
}
