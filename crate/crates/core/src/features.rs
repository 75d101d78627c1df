//! Channel-major feature maps and the two fusion operators: channel
//! concatenation and element-wise addition.

use thiserror::Error;

use crate::image::LdrImage;
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("shape mismatch: ({0}, {1}, {2}) vs ({3}, {4}, {5})")]
    ShapeMismatch(usize, usize, usize, usize, usize, usize),
    #[error("value buffer holds {got} entries, expected {expected}")]
    BufferSize { got: usize, expected: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("spatial dimensions must be at least 1x1, got {width}x{height}")]
    EmptySpatial { width: usize, height: usize },
}

/// `channels x height x width` tensor of finite scalars, channel-major:
/// `value(c, y, x) = values[c * height * width + y * width + x]`.
/// Zero channels are allowed (the empty operand of concatenation).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T: Real> {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<T>,
    ) -> Result<Self, FeatureError> {
        if height == 0 || width == 0 {
            return Err(FeatureError::EmptySpatial { width, height });
        }
        let expected = channels * height * width;
        if values.len() != expected {
            return Err(FeatureError::BufferSize { got: values.len(), expected });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { index });
        }
        Ok(Self { channels, height, width, values })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, c: usize, y: usize, x: usize) -> T {
        self.values[(c * self.height + y) * self.width + x]
    }

    /// One channel as a contiguous `height * width` slice.
    pub fn channel(&self, c: usize) -> &[T] {
        let plane = self.height * self.width;
        &self.values[c * plane..(c + 1) * plane]
    }
}

/// Lifts an 8-bit image into a `3 x H x W` feature map with values scaled
/// to `[0, 1]`. Stands in for an encoder so fusion and attention can be
/// exercised on real data.
pub fn image_to_features<T: Real>(image: &LdrImage) -> FeatureMap<T> {
    let (w, h) = (image.width(), image.height());
    let mut values = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        for px in image.pixels().chunks_exact(3) {
            values.push(real::<T>(px[c] as f64 / 255.0));
        }
    }
    FeatureMap::new(3, h, w, values).expect("image values are finite")
}

/// Stacks `a`'s channels before `b`'s. Operands must agree spatially.
pub fn fuse_concat<T: Real>(
    a: &FeatureMap<T>,
    b: &FeatureMap<T>,
) -> Result<FeatureMap<T>, FeatureError> {
    if a.height != b.height || a.width != b.width {
        return Err(FeatureError::ShapeMismatch(
            a.channels, a.height, a.width, b.channels, b.height, b.width,
        ));
    }
    let mut values = Vec::with_capacity(a.values.len() + b.values.len());
    values.extend_from_slice(&a.values);
    values.extend_from_slice(&b.values);
    FeatureMap::new(a.channels + b.channels, a.height, a.width, values)
}

/// Element-wise sum of two identically shaped maps.
pub fn fuse_add<T: Real>(
    a: &FeatureMap<T>,
    b: &FeatureMap<T>,
) -> Result<FeatureMap<T>, FeatureError> {
    if a.shape() != b.shape() {
        return Err(FeatureError::ShapeMismatch(
            a.channels, a.height, a.width, b.channels, b.height, b.width,
        ));
    }
    let values = a.values.iter().zip(&b.values).map(|(&x, &y)| x + y).collect();
    FeatureMap::new(a.channels, a.height, a.width, values)
}
