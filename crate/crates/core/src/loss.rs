//! Reconstruction losses and pixel-level metrics over batches of unit-range
//! image pairs, plus the composite objective combining them.
//!
//! All operations consume planes in `[0, 1]`; formulas stated on the
//! intensity scale multiply by `L = 2^bitDepth - 1` internally. Batch
//! reductions always run in input order, so results are identical whatever
//! the caller's parallelism.

use thiserror::Error;

use crate::features::FeatureMap;
use crate::image::{HdrImage, Range};
use crate::scalar::{real, Real};
use crate::ssim::{avg_pool_half, ms_ssim, SsimParams};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("shape mismatch: {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    ShapeMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("batch must contain at least one pair")]
    EmptyBatch,
    #[error("batch images must be flagged unit-range")]
    NotUnitRange,
    #[error("plane too small: need minimum dimension {needed}, got {got}")]
    TooSmall { needed: usize, got: usize },
    #[error("numeric domain violation: {0}")]
    NumericDomain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Scaling factors of the composite objective.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    /// Pixel L1 term.
    pub alpha: f64,
    /// Perceptual (feature-space) term.
    pub beta: f64,
    /// Weber-weighted PSNR term.
    pub delta: f64,
    /// Multi-scale structural term.
    pub gamma: f64,
    /// Color-distance term.
    pub lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.18, beta: 0.5, delta: 0.82, gamma: 0.80, lambda: 0.82 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        let all = [self.alpha, self.beta, self.delta, self.gamma, self.lambda];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(LossError::InvalidParameter(
                "loss weights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters of the Weber-weighted PSNR: per-pixel weight
/// `w = fraction * (2^bitDepth - X)` on the intensity scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeberParams {
    /// Weber fraction (just-noticeable-difference ratio).
    pub fraction: f64,
    pub bit_depth: u32,
}

impl Default for WeberParams {
    fn default() -> Self {
        Self { fraction: 0.02, bit_depth: 8 }
    }
}

impl WeberParams {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.fraction > 0.0 && self.fraction.is_finite()) {
            return Err(LossError::InvalidParameter("weber fraction must be positive".into()));
        }
        if self.bit_depth == 0 || self.bit_depth > 32 {
            return Err(LossError::InvalidParameter("bit_depth must be in 1..=32".into()));
        }
        Ok(())
    }
}

/// Ordered collection of shape-matched unit-range pairs `(X_t, Y_t)`,
/// `X` being the reference and `Y` the reconstruction.
#[derive(Debug, Clone)]
pub struct ImageBatch<T: Real> {
    pairs: Vec<(HdrImage<T>, HdrImage<T>)>,
}

impl<T: Real> ImageBatch<T> {
    pub fn new(pairs: Vec<(HdrImage<T>, HdrImage<T>)>) -> Result<Self, LossError> {
        if pairs.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        for (x, y) in &pairs {
            if x.shape() != y.shape() {
                return Err(LossError::ShapeMismatch { left: x.shape(), right: y.shape() });
            }
            if x.range() != Range::Unit || y.range() != Range::Unit {
                return Err(LossError::NotUnitRange);
            }
        }
        Ok(Self { pairs })
    }

    pub fn single(x: HdrImage<T>, y: HdrImage<T>) -> Result<Self, LossError> {
        Self::new(vec![(x, y)])
    }

    pub fn pairs(&self) -> &[(HdrImage<T>, HdrImage<T>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Rebuilds pair `t` with a new reconstruction pixel buffer. The buffer
    /// must respect the unit-range invariant; used by finite differencing.
    pub(crate) fn with_reconstruction_pixels(&self, t: usize, pixels: Vec<T>) -> Self {
        let mut pairs = self.pairs.clone();
        pairs[t].1 = pairs[t].1.with_pixels_unchecked(pixels);
        Self { pairs }
    }
}

/// Deterministic source of feature maps for the perceptual loss. The
/// pretrained-network extractor lives behind this seam; the built-in
/// implementations keep the loss exercisable without any network.
pub trait FeatureExtractor<T: Real> {
    fn extract(&self, image: &HdrImage<T>) -> Vec<FeatureMap<T>>;
}

/// Single level: the image itself as a `3 x H x W` map. Makes the
/// perceptual loss coincide with per-pair MSE.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

fn image_as_feature_map<T: Real>(image: &HdrImage<T>) -> FeatureMap<T> {
    let (w, h) = (image.width(), image.height());
    let mut values = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        values.extend(image.pixels().iter().skip(c).step_by(3).copied());
    }
    FeatureMap::new(3, h, w, values).expect("image values are finite")
}

impl<T: Real> FeatureExtractor<T> for IdentityExtractor {
    fn extract(&self, image: &HdrImage<T>) -> Vec<FeatureMap<T>> {
        vec![image_as_feature_map(image)]
    }
}

/// Levels of a 2x average-pooling pyramid, level 0 being the image itself.
/// Levels that would lose a spatial dimension entirely are omitted.
#[derive(Debug, Clone, Copy)]
pub struct PyramidExtractor {
    pub levels: usize,
}

impl Default for PyramidExtractor {
    fn default() -> Self {
        Self { levels: 4 }
    }
}

impl<T: Real> FeatureExtractor<T> for PyramidExtractor {
    fn extract(&self, image: &HdrImage<T>) -> Vec<FeatureMap<T>> {
        let mut out = Vec::with_capacity(self.levels);
        let mut current = image_as_feature_map(image);
        for level in 0..self.levels {
            if level > 0 {
                let (h, w) = (current.height(), current.width());
                if h < 2 || w < 2 {
                    break;
                }
                let mut values = Vec::new();
                let mut dims = (0, 0);
                for c in 0..current.channels() {
                    let (pooled, nh, nw) = avg_pool_half(current.channel(c), h, w);
                    values.extend(pooled);
                    dims = (nh, nw);
                }
                current = FeatureMap::new(current.channels(), dims.0, dims.1, values)
                    .expect("pooled values are finite");
            }
            out.push(current.clone());
        }
        out
    }
}

fn batch_mean<T: Real>(
    batch: &ImageBatch<T>,
    mut per_pair: impl FnMut(&HdrImage<T>, &HdrImage<T>) -> Result<T, LossError>,
) -> Result<T, LossError> {
    let mut sum = T::zero();
    for (x, y) in batch.pairs() {
        sum = sum + per_pair(x, y)?;
    }
    Ok(sum / real(batch.len() as f64))
}

/// Mean absolute error between the pairs, on the unit scale.
pub fn loss_l1<T: Real>(batch: &ImageBatch<T>) -> T {
    batch_mean(batch, |x, y| {
        let sum: T = x.pixels().iter().zip(y.pixels()).map(|(&a, &b)| (a - b).abs()).sum();
        Ok(sum / real(x.pixels().len() as f64))
    })
    .expect("per-pair closure is infallible")
}

/// Mean over extractor levels of the mean-squared feature difference,
/// averaged over the batch.
pub fn loss_perceptual<T: Real>(
    batch: &ImageBatch<T>,
    extractor: &dyn FeatureExtractor<T>,
) -> Result<T, LossError> {
    batch_mean(batch, |x, y| {
        let fx = extractor.extract(x);
        let fy = extractor.extract(y);
        if fx.len() != fy.len() || fx.is_empty() {
            return Err(LossError::Internal(format!(
                "extractor produced {} vs {} levels",
                fx.len(),
                fy.len()
            )));
        }
        let mut level_sum = T::zero();
        for (a, b) in fx.iter().zip(&fy) {
            if a.shape() != b.shape() {
                return Err(LossError::Internal("extractor level shapes differ".into()));
            }
            let sq: T =
                a.values().iter().zip(b.values()).map(|(&p, &q)| (p - q) * (p - q)).sum();
            level_sum = level_sum + sq / real(a.values().len() as f64);
        }
        Ok(level_sum / real(fx.len() as f64))
    })
}

/// Weber-weighted PSNR in dB. On the intensity scale, each squared error is
/// weighted by `(fraction * (2^bitDepth - X))^2`, emphasizing errors against
/// dark reference pixels. Returns `+inf` when the weighted error is zero.
/// Not symmetric: the weights depend on the reference `x` only.
pub fn psnr_weber<T: Real>(
    x: &HdrImage<T>,
    y: &HdrImage<T>,
    params: &WeberParams,
) -> Result<T, LossError> {
    if x.shape() != y.shape() {
        return Err(LossError::ShapeMismatch { left: x.shape(), right: y.shape() });
    }
    params.validate()?;
    let scale: T = real((1u64 << params.bit_depth) as f64 - 1.0);
    let two_pow: T = real((1u64 << params.bit_depth) as f64);
    let fraction: T = real(params.fraction);

    let mut weighted = T::zero();
    for (&a, &b) in x.pixels().iter().zip(y.pixels()) {
        let xi = a * scale;
        let yi = b * scale;
        let w = fraction * (two_pow - xi);
        let d = xi - yi;
        weighted = weighted + w * w * d * d;
    }
    weighted = weighted / real(x.pixels().len() as f64);
    if weighted == T::zero() {
        return Ok(T::infinity());
    }
    Ok(real::<T>(10.0) * (scale * scale / weighted).log10())
}

/// Mean reciprocal Weber PSNR over the batch; identical pairs (infinite
/// PSNR) contribute zero. A nonpositive PSNR is reported as an error rather
/// than silently clamped.
pub fn loss_weber<T: Real>(batch: &ImageBatch<T>, params: &WeberParams) -> Result<T, LossError> {
    batch_mean(batch, |x, y| {
        let p = psnr_weber(x, y, params)?;
        if p.is_infinite() {
            Ok(T::zero())
        } else if p <= T::zero() {
            Err(LossError::NumericDomain(format!(
                "Weber PSNR is {p} dB; the reciprocal loss requires it positive"
            )))
        } else {
            Ok(T::one() / p)
        }
    })
}

/// Mean multi-scale structural dissimilarity `1 - MS-SSIM` over the batch.
pub fn loss_msssim<T: Real>(batch: &ImageBatch<T>, params: &SsimParams) -> Result<T, LossError> {
    batch_mean(batch, |x, y| Ok(T::one() - ms_ssim(x, y, params)?))
}

fn pair_color_distance<T: Real>(x: &HdrImage<T>, y: &HdrImage<T>, scale: T) -> T {
    let mut sq = T::zero();
    for (&a, &b) in x.pixels().iter().zip(y.pixels()) {
        let d = a * scale - b * scale;
        sq = sq + d * d;
    }
    sq.sqrt()
}

/// Mean normalized Euclidean color distance
/// `sqrt(sum over pixels and channels of (X - Y)^2) / (2^bitDepth - 1)` on
/// the intensity scale. The literal formula carries no per-pixel
/// normalization, so it grows with image size; see
/// [`loss_color_per_pixel`] for the size-invariant variant.
pub fn loss_color<T: Real>(batch: &ImageBatch<T>, bit_depth: u32) -> T {
    let scale: T = real((1u64 << bit_depth) as f64 - 1.0);
    batch_mean(batch, |x, y| Ok(pair_color_distance(x, y, scale) / scale))
        .expect("per-pair closure is infallible")
}

/// [`loss_color`] divided by the square root of the pixel count, making the
/// magnitude independent of image size.
pub fn loss_color_per_pixel<T: Real>(batch: &ImageBatch<T>, bit_depth: u32) -> T {
    let scale: T = real((1u64 << bit_depth) as f64 - 1.0);
    batch_mean(batch, |x, y| {
        let pixels = real::<T>((x.width() * x.height()) as f64);
        Ok(pair_color_distance(x, y, scale) / scale / pixels.sqrt())
    })
    .expect("per-pair closure is infallible")
}

/// Peak signal-to-noise ratio in dB on the intensity scale, `+inf` for
/// identical planes.
pub fn psnr<T: Real>(x: &HdrImage<T>, y: &HdrImage<T>, bit_depth: u32) -> Result<T, LossError> {
    if x.shape() != y.shape() {
        return Err(LossError::ShapeMismatch { left: x.shape(), right: y.shape() });
    }
    let scale: T = real((1u64 << bit_depth) as f64 - 1.0);
    let mut sq = T::zero();
    for (&a, &b) in x.pixels().iter().zip(y.pixels()) {
        let d = a * scale - b * scale;
        sq = sq + d * d;
    }
    let mse = sq / real(x.pixels().len() as f64);
    if mse == T::zero() {
        return Ok(T::infinity());
    }
    Ok(real::<T>(10.0) * (scale * scale / mse).log10())
}

/// Composite objective value with its per-term breakdown.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CompositeLoss<T> {
    pub total: T,
    pub l1: T,
    pub perceptual: T,
    pub weber: T,
    pub msssim: T,
    pub color: T,
    pub weights: LossWeights,
}

/// Weighted sum of the five loss terms:
/// `alpha * L1 + beta * perceptual + delta * weber + gamma * msssim +
/// lambda * color`.
pub fn composite_loss<T: Real>(
    batch: &ImageBatch<T>,
    weights: &LossWeights,
    extractor: &dyn FeatureExtractor<T>,
    weber: &WeberParams,
    ssim: &SsimParams,
) -> Result<CompositeLoss<T>, LossError> {
    weights.validate()?;
    let l1 = loss_l1(batch);
    let perceptual = loss_perceptual(batch, extractor)?;
    let weber_term = loss_weber(batch, weber)?;
    let msssim = loss_msssim(batch, ssim)?;
    let color = loss_color(batch, weber.bit_depth);
    let total = real::<T>(weights.alpha) * l1
        + real::<T>(weights.beta) * perceptual
        + real::<T>(weights.delta) * weber_term
        + real::<T>(weights.gamma) * msssim
        + real::<T>(weights.lambda) * color;
    Ok(CompositeLoss {
        total,
        l1,
        perceptual,
        weber: weber_term,
        msssim,
        color,
        weights: *weights,
    })
}
