//! Bit-exact image file codecs: binary PPM (P6) for LDR data and color PFM
//! for HDR data.

pub mod pfm;
pub mod ppm;

use std::io;

use thiserror::Error;

use crate::image::ImageError;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("unsupported {what}: {detail}")]
    Unsupported { what: &'static str, detail: String },
    #[error("truncated payload: expected {expected} bytes, found {got}")]
    Truncated { expected: usize, got: usize },
    #[error("invalid pixel data: {0}")]
    Validation(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn format_err(what: &'static str, detail: impl Into<String>) -> CodecError {
    CodecError::Format { what, detail: detail.into() }
}

/// Cursor over a netpbm-style header: whitespace-separated tokens, with
/// `#`-to-end-of-line comments when enabled, terminated by a single
/// whitespace byte before the binary payload.
struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    allow_comments: bool,
}

impl<'a> HeaderCursor<'a> {
    fn new(bytes: &'a [u8], allow_comments: bool) -> Self {
        Self { bytes, pos: 0, allow_comments }
    }

    fn skip_space_and_comments(&mut self) -> Result<(), CodecError> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.allow_comments && self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return Ok(());
            }
        }
    }

    fn token(&mut self, what: &'static str) -> Result<&'a str, CodecError> {
        self.skip_space_and_comments()?;
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && !(self.allow_comments && self.bytes[self.pos] == b'#')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(format_err(what, "missing header token"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| format_err(what, "header token is not ASCII"))
    }

    /// Consumes the single whitespace byte separating the header from the
    /// binary payload and returns the payload.
    fn payload(mut self, what: &'static str) -> Result<&'a [u8], CodecError> {
        if self.allow_comments && self.bytes.get(self.pos) == Some(&b'#') {
            self.skip_space_and_comments()?;
        }
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(&self.bytes[self.pos + 1..]),
            _ => Err(format_err(what, "missing whitespace before payload")),
        }
    }

    fn dimension(&mut self, what: &'static str) -> Result<usize, CodecError> {
        let tok = self.token(what)?;
        let value: usize =
            tok.parse().map_err(|_| format_err(what, format!("invalid dimension {tok:?}")))?;
        if value == 0 {
            return Err(format_err(what, "zero dimension"));
        }
        Ok(value)
    }
}
