//! Numerical gradient verification for the loss functions.
//!
//! [`grad_fd`] differentiates any batch loss with respect to every
//! reconstruction entry by central differences, falling back to a one-sided
//! stencil where the perturbation would leave `[0, 1]`. [`grad_color_analytic`]
//! is the closed-form gradient of the color loss; the two agreeing is the
//! correctness check for both.

use crate::loss::{ImageBatch, LossError};
use crate::scalar::{real, Real};

/// One gradient array per pair, aligned with the reconstruction's pixel
/// buffer.
pub type BatchGradient<T> = Vec<Vec<T>>;

/// Central-difference gradient of `loss` with respect to every entry of
/// every reconstruction `Y_t`. Perturbed values are clamped to `[0, 1]`, and
/// the divisor is the actual displacement, so boundary entries degrade to
/// one-sided differences.
pub fn grad_fd<T, F>(
    loss: F,
    batch: &ImageBatch<T>,
    epsilon: T,
) -> Result<BatchGradient<T>, LossError>
where
    T: Real,
    F: Fn(&ImageBatch<T>) -> Result<T, LossError>,
{
    if !epsilon.is_finite() || epsilon <= T::zero() {
        return Err(LossError::InvalidParameter("epsilon must be positive and finite".into()));
    }
    let mut gradients = Vec::with_capacity(batch.len());
    for t in 0..batch.len() {
        let base = batch.pairs()[t].1.pixels().to_vec();
        let mut grad = Vec::with_capacity(base.len());
        let mut scratch = base.clone();
        for e in 0..base.len() {
            let up = (base[e] + epsilon).min(T::one());
            let down = (base[e] - epsilon).max(T::zero());
            let step = up - down;
            if step == T::zero() {
                return Err(LossError::NumericDomain(
                    "perturbation collapsed; epsilon too small for the scalar type".into(),
                ));
            }
            scratch[e] = up;
            let f_up = loss(&batch.with_reconstruction_pixels(t, scratch.clone()))?;
            scratch[e] = down;
            let f_down = loss(&batch.with_reconstruction_pixels(t, scratch.clone()))?;
            scratch[e] = base[e];
            let g = (f_up - f_down) / step;
            if !g.is_finite() {
                return Err(LossError::NumericDomain(format!(
                    "non-finite finite-difference quotient at pair {t}, entry {e}"
                )));
            }
            grad.push(g);
        }
        gradients.push(grad);
    }
    Ok(gradients)
}

/// Closed-form gradient of the color loss with respect to each
/// reconstruction entry: `(Y_e - X_e) / (n * d_t)` on the unit scale, where
/// `d_t` is the pair's Euclidean distance. Errors on zero distance, where
/// the norm is not differentiable.
pub fn grad_color_analytic<T: Real>(
    batch: &ImageBatch<T>,
    bit_depth: u32,
) -> Result<BatchGradient<T>, LossError> {
    if bit_depth == 0 || bit_depth > 32 {
        return Err(LossError::InvalidParameter("bit_depth must be in 1..=32".into()));
    }
    let n = real::<T>(batch.len() as f64);
    let mut gradients = Vec::with_capacity(batch.len());
    for (x, y) in batch.pairs() {
        let mut sq = T::zero();
        for (&a, &b) in x.pixels().iter().zip(y.pixels()) {
            let d = a - b;
            sq = sq + d * d;
        }
        let dist = sq.sqrt();
        if dist == T::zero() {
            return Err(LossError::Degenerate(
                "identical pair: the color-loss gradient is undefined at zero distance".into(),
            ));
        }
        let grad = x
            .pixels()
            .iter()
            .zip(y.pixels())
            .map(|(&a, &b)| (b - a) / (n * dist))
            .collect();
        gradients.push(grad);
    }
    Ok(gradients)
}

/// Largest relative disagreement between two gradient fields, with absolute
/// comparison below `floor` to avoid amplifying noise around zero.
pub fn max_relative_error<T: Real>(a: &BatchGradient<T>, b: &BatchGradient<T>, floor: T) -> T {
    let mut worst = T::zero();
    for (ga, gb) in a.iter().zip(b) {
        for (&va, &vb) in ga.iter().zip(gb) {
            let denom = va.abs().max(vb.abs());
            let err = if denom < floor { (va - vb).abs() } else { (va - vb).abs() / denom };
            worst = worst.max(err);
        }
    }
    worst
}
