//! Binary PNM: 8-bit P6 colour images and P5 instance masks.

use crate::error::{Error, Result};
use crate::raster::{ImageRgb, InstanceMask};

use super::header::HeaderReader;

/// Quantises to 8 bits (round half away from zero after clamping to [0, 1]).
pub fn encode_ppm(image: &ImageRgb) -> Vec<u8> {
    let (w, h) = image.dims();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * w * h);
    for px in image.pixels() {
        for c in px {
            out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

struct PnmHeader {
    width: usize,
    height: usize,
    maxval: usize,
    payload: usize,
}

fn read_header(bytes: &[u8], magic: &str) -> Result<PnmHeader> {
    let mut hdr = HeaderReader::new(bytes);
    let (at, m) = hdr.token()?;
    if m != magic {
        return Err(Error::Format(format!("expected {magic} at byte {at}, found {m:?}")));
    }
    let width = hdr.dimension()?;
    let height = hdr.dimension()?;
    let maxval = hdr.number("maxval")?;
    let payload = hdr.end_of_header()?;
    Ok(PnmHeader { width, height, maxval, payload })
}

fn payload<'a>(bytes: &'a [u8], h: &PnmHeader, sample_bytes: usize, channels: usize) -> Result<&'a [u8]> {
    let expected = h.width * h.height * channels * sample_bytes;
    let data = &bytes[h.payload..];
    if data.len() < expected {
        return Err(Error::Parse { offset: bytes.len(), message: format!("payload truncated: {} of {expected} bytes", data.len()) });
    }
    if data.len() > expected {
        return Err(Error::Parse { offset: h.payload + expected, message: "trailing bytes after payload".into() });
    }
    Ok(data)
}

/// Reads an 8-bit P6 image into [0, 1] by dividing by 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<ImageRgb> {
    let h = read_header(bytes, "P6")?;
    if h.maxval != 255 {
        return Err(Error::Format(format!("unsupported PPM maxval {}", h.maxval)));
    }
    let data = payload(bytes, &h, 1, 3)?;
    let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]].map(|b| f64::from(b) / 255.0)).collect();
    ImageRgb::new(h.width, h.height, pixels)
}

/// Instance ids as 16-bit big-endian P5 samples.
pub fn encode_pgm16(mask: &InstanceMask) -> Vec<u8> {
    let (w, h) = mask.dims();
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    out.reserve(2 * w * h);
    for id in mask.ids() {
        out.extend_from_slice(&id.to_be_bytes());
    }
    out
}

/// Reads a P5 mask; samples are 8-bit for maxval < 256 and 16-bit otherwise.
pub fn decode_pgm(bytes: &[u8]) -> Result<InstanceMask> {
    let h = read_header(bytes, "P5")?;
    if h.maxval == 0 || h.maxval > 65535 {
        return Err(Error::Format(format!("unsupported PGM maxval {}", h.maxval)));
    }
    let ids: Vec<u16> = if h.maxval < 256 {
        payload(bytes, &h, 1, 1)?.iter().map(|&b| u16::from(b)).collect()
    } else {
        payload(bytes, &h, 2, 1)?.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    if let Some(id) = ids.iter().find(|&&id| usize::from(id) > h.maxval) {
        return Err(Error::Format(format!("sample {id} exceeds maxval {}", h.maxval)));
    }
    InstanceMask::new(h.width, h.height, ids)
}
