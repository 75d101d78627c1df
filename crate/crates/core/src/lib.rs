//! Numerics toolkit for HDR image reconstruction experiments.
//!
//! The crate covers the measurement side of LDR-to-HDR reconstruction work:
//!
//! - bit-exact PPM (P6) and color PFM codecs ([`codec`]);
//! - histogram equalization and the logarithmic / Reinhard global
//!   tone-mapping operators ([`preprocess`]);
//! - feature-map fusion (concatenation, addition) and a deterministic
//!   self-attention forward pass ([`features`], [`attention`]);
//! - reconstruction losses (L1, perceptual, Weber-weighted PSNR,
//!   multi-scale structural, color distance) with a composite objective and
//!   finite-difference gradient checks ([`loss`], [`ssim`], [`grad`]);
//! - a directory-level evaluation harness emitting CSV/JSON reports
//!   ([`eval`]).
//!
//! Everything downstream of decoding is generic over the [`scalar::Real`]
//! scalar type; the aliases below fix the two supported instantiations.

pub mod attention;
pub mod codec;
pub mod eval;
pub mod features;
pub mod grad;
pub mod image;
pub mod loss;
pub mod preprocess;
pub mod scalar;
pub mod ssim;

pub use scalar::Real;

pub type HdrImageF32 = image::HdrImage<f32>;
pub type HdrImageF64 = image::HdrImage<f64>;
pub type FeatureMapF32 = features::FeatureMap<f32>;
pub type FeatureMapF64 = features::FeatureMap<f64>;
pub type AttentionParamsF32 = attention::AttentionParams<f32>;
pub type AttentionParamsF64 = attention::AttentionParams<f64>;
pub type ImageBatchF32 = loss::ImageBatch<f32>;
pub type ImageBatchF64 = loss::ImageBatch<f64>;
