//! Color PFM ("PF"): the sole HDR interchange format.
//!
//! Scanlines are stored bottom-to-top; the scale line's sign encodes float
//! endianness (negative = little-endian). The writer always emits
//! `PF\n<width> <height>\n-1.0\n` with little-endian floats, the reader
//! accepts both endiannesses. Decoded values reproduce the stored `f32` bits
//! exactly; grayscale ("Pf") input is rejected.

use std::path::Path;

use super::{format_err, CodecError, HeaderCursor};
use crate::image::HdrImage;

pub fn read_pfm(bytes: &[u8]) -> Result<HdrImage<f32>, CodecError> {
    let mut cur = HeaderCursor::new(bytes, false);
    let magic = cur.token("PFM header")?;
    match magic {
        "PF" => {}
        "Pf" => {
            return Err(CodecError::Unsupported {
                what: "PFM variant",
                detail: "grayscale \"Pf\" images are not supported".into(),
            })
        }
        other => {
            return Err(format_err("PFM header", format!("expected magic \"PF\", got {other:?}")))
        }
    }
    let width = cur.dimension("PFM header")?;
    let height = cur.dimension("PFM header")?;
    let scale = cur.token("PFM header")?;
    let scale: f32 = scale
        .parse()
        .map_err(|_| format_err("PFM header", format!("invalid scale {scale:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_err("PFM header", format!("invalid scale {scale}")));
    }
    let little_endian = scale < 0.0;

    let payload = cur.payload("PFM header")?;
    let expected = width * height * 3 * 4;
    if payload.len() < expected {
        return Err(CodecError::Truncated { expected, got: payload.len() });
    }

    // File rows run bottom-to-top; flip to top-to-bottom in memory.
    let row_len = width * 3;
    let mut pixels = vec![0.0f32; width * height * 3];
    for file_row in 0..height {
        let mem_row = height - 1 - file_row;
        let src = &payload[file_row * row_len * 4..(file_row + 1) * row_len * 4];
        let dst = &mut pixels[mem_row * row_len..(mem_row + 1) * row_len];
        for (value, chunk) in dst.iter_mut().zip(src.chunks_exact(4)) {
            let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
            *value = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    Ok(HdrImage::new(width, height, pixels)?)
}

pub fn write_pfm(image: &HdrImage<f32>) -> Vec<u8> {
    write_pfm_raw(image.width(), image.height(), image.pixels())
}

/// Encodes raw row-major RGB floats without `HdrImage` validation. Useful
/// for dumping intermediate tensors that may contain negative values.
pub fn write_pfm_raw(width: usize, height: usize, pixels: &[f32]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height * 3, "pixel buffer does not match dimensions");
    let mut out = format!("PF\n{width} {height}\n-1.0\n").into_bytes();
    let row_len = width * 3;
    for mem_row in (0..height).rev() {
        for value in &pixels[mem_row * row_len..(mem_row + 1) * row_len] {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm_file(path: impl AsRef<Path>) -> Result<HdrImage<f32>, CodecError> {
    read_pfm(&std::fs::read(path)?)
}

pub fn write_pfm_file(path: impl AsRef<Path>, image: &HdrImage<f32>) -> Result<(), CodecError> {
    Ok(std::fs::write(path, write_pfm(image))?)
}
