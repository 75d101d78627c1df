//! Binary PPM (P6) with maxval 255: the sole LDR interchange format.
//!
//! The writer emits `P6\n<width> <height>\n255\n` followed by raw RGB bytes,
//! so output is byte-deterministic and decode(encode(x)) == x. The reader
//! additionally accepts `#` comments in the header; it never writes them.

use std::path::Path;

use super::{format_err, CodecError, HeaderCursor};
use crate::image::LdrImage;

pub fn read_ppm(bytes: &[u8]) -> Result<LdrImage, CodecError> {
    let mut cur = HeaderCursor::new(bytes, true);
    let magic = cur.token("PPM header")?;
    if magic != "P6" {
        return Err(format_err("PPM header", format!("expected magic \"P6\", got {magic:?}")));
    }
    let width = cur.dimension("PPM header")?;
    let height = cur.dimension("PPM header")?;
    let maxval = cur.token("PPM header")?;
    let maxval: u32 = maxval
        .parse()
        .map_err(|_| format_err("PPM header", format!("invalid maxval {maxval:?}")))?;
    if maxval != 255 {
        return Err(CodecError::Unsupported {
            what: "PPM maxval",
            detail: format!("only maxval 255 is supported, got {maxval}"),
        });
    }
    let payload = cur.payload("PPM header")?;
    let expected = width * height * 3;
    if payload.len() < expected {
        return Err(CodecError::Truncated { expected, got: payload.len() });
    }
    Ok(LdrImage::new(width, height, payload[..expected].to_vec())?)
}

pub fn write_ppm(image: &LdrImage) -> Vec<u8> {
    let mut out =
        format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

pub fn read_ppm_file(path: impl AsRef<Path>) -> Result<LdrImage, CodecError> {
    read_ppm(&std::fs::read(path)?)
}

pub fn write_ppm_file(path: impl AsRef<Path>, image: &LdrImage) -> Result<(), CodecError> {
    Ok(std::fs::write(path, write_ppm(image))?)
}
