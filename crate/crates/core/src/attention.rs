//! Deterministic self-attention forward pass over feature maps.
//!
//! With `X` the `C x N` flattening of the input (`N = H * W`), the pass
//! computes query/key/value projections `F = Wq X`, `G = Wk X`, `H = Wv X`,
//! scores `S = F^T G`, softmax-normalizes every column of `S` into `beta`
//! (so column `j` weights the contribution of each position `i` to output
//! position `j`), and returns `gamma * (H beta) + X` in the input shape.
//! Projections are bias-free 1x1 convolutions; query/key channels are
//! reduced to `C' = max(1, C / reduction)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{FeatureError, FeatureMap};
use crate::scalar::{real, Real};

/// Default query/key channel reduction factor.
pub const DEFAULT_REDUCTION: usize = 8;

/// Projection weights and residual scale of the attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T: Real> {
    channels: usize,
    reduction: usize,
    /// Row-major `C' x C` query projection.
    wq: Vec<T>,
    /// Row-major `C' x C` key projection.
    wk: Vec<T>,
    /// Row-major `C x C` value projection.
    wv: Vec<T>,
    gamma: T,
}

impl<T: Real> AttentionParams<T> {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn reduction(&self) -> usize {
        self.reduction
    }

    /// Reduced query/key channel count `C' = max(1, C / reduction)`.
    pub fn projected_channels(&self) -> usize {
        (self.channels / self.reduction).max(1)
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// Returns a copy with a different residual scale.
    pub fn with_gamma(mut self, gamma: T) -> Self {
        assert!(gamma.is_finite(), "gamma must be finite");
        self.gamma = gamma;
        self
    }

    pub fn query_weights(&self) -> &[T] {
        &self.wq
    }

    pub fn key_weights(&self) -> &[T] {
        &self.wk
    }

    pub fn value_weights(&self) -> &[T] {
        &self.wv
    }
}

/// Fills the projection matrices from a seeded generator (entries uniform in
/// `[-0.1, 0.1]`), with `gamma = 0` so the block starts as the identity.
/// The same seed always produces the same parameters.
pub fn init_attention_params<T: Real>(
    seed: u64,
    channels: usize,
    reduction: usize,
) -> AttentionParams<T> {
    assert!(channels >= 1, "channels must be at least 1");
    assert!(reduction >= 1, "reduction must be at least 1");
    let projected = (channels / reduction).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vec<T> {
        (0..len).map(|_| real(rng.gen_range(-0.1..=0.1))).collect()
    };
    AttentionParams {
        channels,
        reduction,
        wq: draw(projected * channels),
        wk: draw(projected * channels),
        wv: draw(channels * channels),
        gamma: T::zero(),
    }
}

/// `rows x C` row-major matrix times the `C x N` flattened input.
fn project<T: Real>(weights: &[T], rows: usize, x: &FeatureMap<T>) -> Vec<T> {
    let channels = x.channels();
    let n = x.height() * x.width();
    let mut out = vec![T::zero(); rows * n];
    for r in 0..rows {
        let w_row = &weights[r * channels..(r + 1) * channels];
        let out_row = &mut out[r * n..(r + 1) * n];
        for (c, &w) in w_row.iter().enumerate() {
            for (o, &v) in out_row.iter_mut().zip(x.channel(c)) {
                *o = *o + w * v;
            }
        }
    }
    out
}

/// Softmax of one score column, shifted by the column max before
/// exponentiation.
fn softmax_column<T: Real>(scores: &mut [T]) {
    let max = scores.iter().cloned().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum = sum + *s;
    }
    for s in scores.iter_mut() {
        *s = *s / sum;
    }
}

/// Runs the attention forward pass; the output shape equals the input shape.
pub fn self_attention<T: Real>(
    x: &FeatureMap<T>,
    params: &AttentionParams<T>,
) -> Result<FeatureMap<T>, FeatureError> {
    let (channels, height, width) = x.shape();
    if channels != params.channels {
        return Err(FeatureError::ShapeMismatch(
            channels, height, width, params.channels, height, width,
        ));
    }
    let n = height * width;
    let projected = params.projected_channels();

    let queries = project(&params.wq, projected, x); // C' x N
    let keys = project(&params.wk, projected, x); // C' x N
    let values = project(&params.wv, channels, x); // C x N

    // Stream one score column at a time: column j holds F^T G for all
    // positions i, softmax turns it into mixing weights for output j.
    let mut mixed = vec![T::zero(); channels * n];
    let mut column = vec![T::zero(); n];
    for j in 0..n {
        for (i, slot) in column.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in 0..projected {
                s = s + queries[k * n + i] * keys[k * n + j];
            }
            *slot = s;
        }
        softmax_column(&mut column);
        for c in 0..channels {
            let mut o = T::zero();
            for (i, &b) in column.iter().enumerate() {
                o = o + values[c * n + i] * b;
            }
            mixed[c * n + j] = o;
        }
    }

    let gamma = params.gamma;
    let out: Vec<T> =
        mixed.iter().zip(x.values()).map(|(&o, &v)| gamma * o + v).collect();
    FeatureMap::new(channels, height, width, out)
}

/// Full `N x N` attention weight matrix, column-major
/// (`beta[j * n + i]` weights position `i` in output position `j`).
/// Every column sums to 1. Intended for inspection and tests; the forward
/// pass streams columns instead of materializing this matrix.
pub fn attention_weights<T: Real>(
    x: &FeatureMap<T>,
    params: &AttentionParams<T>,
) -> Result<Vec<T>, FeatureError> {
    let (channels, height, width) = x.shape();
    if channels != params.channels {
        return Err(FeatureError::ShapeMismatch(
            channels, height, width, params.channels, height, width,
        ));
    }
    let n = height * width;
    let projected = params.projected_channels();
    let queries = project(&params.wq, projected, x);
    let keys = project(&params.wk, projected, x);

    let mut beta = vec![T::zero(); n * n];
    for j in 0..n {
        let column = &mut beta[j * n..(j + 1) * n];
        for (i, slot) in column.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in 0..projected {
                s = s + queries[k * n + i] * keys[k * n + j];
            }
            *slot = s;
        }
        softmax_column(column);
    }
    if let Some(index) = beta.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite { index });
    }
    Ok(beta)
}
