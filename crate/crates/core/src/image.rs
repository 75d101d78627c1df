//! Core raster types: 8-bit LDR images, real-valued HDR images, and 256-bin
//! intensity histograms.
//!
//! All types are immutable after construction and validate their invariants
//! in the constructor, so downstream code never has to re-check them.

use thiserror::Error;

use crate::scalar::Real;

/// Number of intensity bins for 8-bit data.
pub const BINS: usize = 256;

/// BT.601 luma weights for (R, G, B).
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer holds {got} values, expected {expected}")]
    BufferSize { got: usize, expected: usize },
    #[error("non-finite pixel value at index {index}")]
    NonFinite { index: usize },
    #[error("negative pixel value at index {index}")]
    Negative { index: usize },
    #[error("pixel value above 1 at index {index} in a unit-range image")]
    AboveUnit { index: usize },
}

/// 8-bit RGB raster. Pixels are stored row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdrImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl LdrImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(ImageError::BufferSize { got: pixels.len(), expected });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major RGB bytes, `width * height * 3` of them.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Nominal range of an HDR raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Range {
    /// Finite nonnegative values with no upper bound.
    Unnormalized,
    /// All values lie in `[0, 1]`.
    Unit,
}

/// Real-valued linear RGB raster. Pixels are stored row-major, three scalars
/// per pixel; all values are finite and nonnegative, and at most 1 when the
/// image is flagged [`Range::Unit`].
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage<T: Real> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
    range: Range,
}

fn validate_hdr<T: Real>(pixels: &[T], range: Range) -> Result<(), ImageError> {
    let one = T::one();
    for (index, &v) in pixels.iter().enumerate() {
        if !v.is_finite() {
            return Err(ImageError::NonFinite { index });
        }
        if v < T::zero() {
            return Err(ImageError::Negative { index });
        }
        if range == Range::Unit && v > one {
            return Err(ImageError::AboveUnit { index });
        }
    }
    Ok(())
}

impl<T: Real> HdrImage<T> {
    /// Builds an unnormalized HDR image (finite, nonnegative values).
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self, ImageError> {
        Self::with_range(width, height, pixels, Range::Unnormalized)
    }

    /// Builds a unit-range HDR image (values additionally bounded by 1).
    pub fn new_unit(width: usize, height: usize, pixels: Vec<T>) -> Result<Self, ImageError> {
        Self::with_range(width, height, pixels, Range::Unit)
    }

    pub fn with_range(
        width: usize,
        height: usize,
        pixels: Vec<T>,
        range: Range,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(ImageError::BufferSize { got: pixels.len(), expected });
        }
        validate_hdr(&pixels, range)?;
        Ok(Self { width, height, pixels, range })
    }

    /// Replaces the pixel buffer without re-validating. The caller must keep
    /// the invariants of `self.range` intact.
    pub(crate) fn with_pixels_unchecked(&self, pixels: Vec<T>) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        Self { width: self.width, height: self.height, pixels, range: self.range }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn range(&self) -> Range {
        self.range
    }

    /// Row-major RGB scalars, `width * height * 3` of them.
    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Widens the pixel data to `f64`. Lossless for `f32` and `f64` sources.
    pub fn to_f64(&self) -> HdrImage<f64> {
        let pixels = self.pixels.iter().map(|v| v.to_f64().expect("finite scalar")).collect();
        HdrImage { width: self.width, height: self.height, pixels, range: self.range }
    }

    /// Narrows the pixel data to `f32`. Fails if a value overflows `f32`.
    pub fn to_f32(&self) -> Result<HdrImage<f32>, ImageError> {
        let pixels: Vec<f32> = self
            .pixels
            .iter()
            .map(|v| v.to_f64().expect("finite scalar") as f32)
            .collect();
        validate_hdr(&pixels, self.range)?;
        Ok(HdrImage { width: self.width, height: self.height, pixels, range: self.range })
    }
}

/// Which intensity planes a histogram covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    /// One histogram per R, G, B channel.
    PerChannel,
    /// A single histogram over BT.601 luma.
    Luma,
}

/// 256-bin intensity histogram: three channel arrays in per-channel mode,
/// exactly one (luma) array otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    mode: ChannelMode,
    counts: Vec<[u64; BINS]>,
}

impl Histogram {
    pub fn mode(&self) -> ChannelMode {
        self.mode
    }

    /// Per-channel count arrays, in `R, G, B` order (or a single `Y` array).
    pub fn channels(&self) -> &[[u64; BINS]] {
        &self.counts
    }

    pub fn channel_labels(&self) -> &'static [&'static str] {
        match self.mode {
            ChannelMode::PerChannel => &["R", "G", "B"],
            ChannelMode::Luma => &["Y"],
        }
    }
}

/// BT.601 luma of an RGB triple, on whatever scale the inputs use.
pub(crate) fn luma601(r: f64, g: f64, b: f64) -> f64 {
    LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
}

/// Rounded BT.601 luma bin of an 8-bit RGB triple.
pub(crate) fn luma_bin(rgb: [u8; 3]) -> usize {
    let y = luma601(rgb[0] as f64, rgb[1] as f64, rgb[2] as f64);
    (y.round() as usize).min(BINS - 1)
}

/// Counts intensities into 256 bins, per channel or over BT.601 luma
/// (`Y = round(0.299 R + 0.587 G + 0.114 B)`).
pub fn compute_histogram(image: &LdrImage, mode: ChannelMode) -> Histogram {
    let counts = match mode {
        ChannelMode::PerChannel => {
            let mut counts = vec![[0u64; BINS]; 3];
            for px in image.pixels().chunks_exact(3) {
                for ch in 0..3 {
                    counts[ch][px[ch] as usize] += 1;
                }
            }
            counts
        }
        ChannelMode::Luma => {
            let mut counts = vec![[0u64; BINS]];
            for px in image.pixels().chunks_exact(3) {
                counts[0][luma_bin([px[0], px[1], px[2]])] += 1;
            }
            counts
        }
    };
    Histogram { mode, counts }
}
