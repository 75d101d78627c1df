//! LDR histogram equalization and global tone-mapping operators.
//!
//! Equalization follows the standard CDF lookup-table construction:
//! `lut[v] = round((cdf(v) - cdf_min) / (pixels - cdf_min) * 255)` where
//! `cdf_min` is the CDF at the lowest occupied bin. Inputs whose histogram
//! occupies a single bin pass through unchanged.

use thiserror::Error;

use crate::image::{
    compute_histogram, luma601, luma_bin, ChannelMode, Histogram, HdrImage, LdrImage, Range, BINS,
};
use crate::scalar::{real, Real};

/// Default compression amount for the logarithmic tone-mapping operator.
pub const DEFAULT_MU: f64 = 5000.0;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("mu must be positive and finite, got {0}")]
    InvalidMu(f64),
    #[error("tone-mapping input must be flagged unit-range")]
    NotUnitRange,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

/// Parameters of the logarithmic tone-mapping operator
/// `T(v) = log(1 + mu v) / log(1 + mu)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TonemapParams {
    mu: f64,
}

impl TonemapParams {
    pub fn new(mu: f64) -> Result<Self, PreprocessError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(PreprocessError::InvalidMu(mu));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Default for TonemapParams {
    fn default() -> Self {
        Self { mu: DEFAULT_MU }
    }
}

/// Color handling for histogram equalization. Luma mode equalizes the BT.601
/// Y plane and shifts all three channels by the luma delta (equivalent to a
/// YCbCr round trip with chroma held fixed); per-channel mode equalizes each
/// channel independently.
pub type EqualizeMode = ChannelMode;

/// Builds the equalization lookup table for one 256-bin histogram.
/// A single occupied bin yields the identity table.
fn equalize_lut(counts: &[u64; BINS], total: u64) -> [u8; BINS] {
    let mut cdf = [0u64; BINS];
    let mut acc = 0u64;
    for (bin, &c) in counts.iter().enumerate() {
        acc += c;
        cdf[bin] = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);

    let mut lut = [0u8; BINS];
    if total == cdf_min {
        for (v, entry) in lut.iter_mut().enumerate() {
            *entry = v as u8;
        }
        return lut;
    }
    let denom = (total - cdf_min) as f64;
    for (v, entry) in lut.iter_mut().enumerate() {
        let num = cdf[v].saturating_sub(cdf_min) as f64;
        *entry = (num / denom * 255.0).round().clamp(0.0, 255.0) as u8;
    }
    lut
}

/// Spreads the intensity distribution toward uniform via the CDF lookup
/// table above. Constant images (one occupied bin) are returned unchanged.
pub fn equalize_histogram(image: &LdrImage, mode: EqualizeMode) -> LdrImage {
    match mode {
        ChannelMode::PerChannel => {
            let hist = compute_histogram(image, ChannelMode::PerChannel);
            let total = (image.width() * image.height()) as u64;
            let luts: Vec<[u8; BINS]> =
                hist.channels().iter().map(|c| equalize_lut(c, total)).collect();
            let pixels = image
                .pixels()
                .chunks_exact(3)
                .flat_map(|px| [luts[0][px[0] as usize], luts[1][px[1] as usize], luts[2][px[2] as usize]])
                .collect();
            LdrImage::new(image.width(), image.height(), pixels).expect("same dimensions")
        }
        ChannelMode::Luma => {
            let hist = compute_histogram(image, ChannelMode::Luma);
            let counts = &hist.channels()[0];
            if counts.iter().filter(|&&c| c > 0).count() <= 1 {
                return image.clone();
            }
            let total = (image.width() * image.height()) as u64;
            let lut = equalize_lut(counts, total);
            let pixels = image
                .pixels()
                .chunks_exact(3)
                .flat_map(|px| {
                    let y = luma601(px[0] as f64, px[1] as f64, px[2] as f64);
                    let delta = lut[luma_bin([px[0], px[1], px[2]])] as f64 - y;
                    px.iter()
                        .map(|&c| (c as f64 + delta).round().clamp(0.0, 255.0) as u8)
                        .collect::<Vec<u8>>()
                })
                .collect();
            LdrImage::new(image.width(), image.height(), pixels).expect("same dimensions")
        }
    }
}

/// Logarithmic compression `T(v) = log(1 + mu v) / log(1 + mu)` applied per
/// value. Requires unit-range input; the output is unit-range with the
/// endpoints fixed (`T(0) = 0`, `T(1) = 1`) and `T` strictly increasing.
pub fn tonemap_mu<T: Real>(
    image: &HdrImage<T>,
    params: &TonemapParams,
) -> Result<HdrImage<T>, PreprocessError> {
    if image.range() != Range::Unit {
        return Err(PreprocessError::NotUnitRange);
    }
    let mu: T = real(params.mu());
    let denom = (T::one() + mu).ln();
    let pixels: Vec<T> =
        image.pixels().iter().map(|&v| (T::one() + mu * v).ln() / denom).collect();
    Ok(HdrImage::new_unit(image.width(), image.height(), pixels)
        .expect("tone-mapped values stay in [0, 1]"))
}

/// Divides every value by the global maximum, producing a unit-range image.
pub fn normalize_minmax<T: Real>(image: &HdrImage<T>) -> Result<HdrImage<T>, PreprocessError> {
    let max = image.pixels().iter().cloned().fold(T::zero(), T::max);
    if max <= T::zero() {
        return Err(PreprocessError::Degenerate("all-zero image cannot be normalized"));
    }
    let pixels: Vec<T> = image.pixels().iter().map(|&v| v / max).collect();
    Ok(HdrImage::new_unit(image.width(), image.height(), pixels)
        .expect("normalized values stay in [0, 1]"))
}

/// Global Reinhard operator `L_d = L / (1 + L)` on BT.601 luminance with
/// chroma ratios preserved, quantized round-to-nearest to 8 bits.
pub fn tonemap_reinhard<T: Real>(image: &HdrImage<T>) -> LdrImage {
    let pixels = image
        .pixels()
        .chunks_exact(3)
        .flat_map(|px| {
            let rgb = [
                px[0].to_f64().expect("finite"),
                px[1].to_f64().expect("finite"),
                px[2].to_f64().expect("finite"),
            ];
            let luminance = luma601(rgb[0], rgb[1], rgb[2]);
            // c * (L_d / L) collapses to c / (1 + L), which also covers L = 0.
            rgb.map(|c| ((c / (1.0 + luminance)) * 255.0).round().clamp(0.0, 255.0) as u8)
        })
        .collect();
    LdrImage::new(image.width(), image.height(), pixels).expect("same dimensions")
}

/// Renders a histogram as CSV with header `bin,channel,count`, ordered
/// bin-major with channels in R,G,B (or single Y) order.
pub fn export_histogram(histogram: &Histogram) -> String {
    let labels = histogram.channel_labels();
    let mut out = String::from("bin,channel,count\n");
    for bin in 0..BINS {
        for (label, counts) in labels.iter().zip(histogram.channels()) {
            out.push_str(&format!("{bin},{label},{}\n", counts[bin]));
        }
    }
    out
}
