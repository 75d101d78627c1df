//! Structural similarity: the luminance and contrast/structure comparisons,
//! their windowed and whole-plane variants, and the multi-scale product.
//!
//! Statistics are population (1/N) moments computed per channel on the
//! intensity scale `L = 2^bitDepth - 1`, with the stabilizers
//! `C1 = (K1 L)^2` and `C2 = (K2 L)^2`. The luminance term is
//! `l = (2 mx my + C1) / (mx^2 + my^2 + C1)` and the joint
//! contrast/structure term is `cs = (2 cov + C2) / (vx + vy + C2)`;
//! channel results are averaged. Windowed mode slides a Gaussian 11x11
//! (sigma 1.5) window over valid positions and averages the local terms;
//! global mode uses whole-plane moments and is the brute-force-checkable
//! variant.

use crate::image::HdrImage;
use crate::loss::LossError;
use crate::scalar::{real, Real};

/// Statistics footprint for the SSIM family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsimMode {
    /// Whole-plane moments.
    Global,
    /// Sliding Gaussian-window moments over valid positions.
    Windowed,
}

/// Parameters of the SSIM family.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SsimParams {
    /// Luminance stabilizer factor, `C1 = (k1 L)^2`.
    pub k1: f64,
    /// Contrast stabilizer factor, `C2 = (k2 L)^2`.
    pub k2: f64,
    /// Sets the intensity scale `L = 2^bit_depth - 1`.
    pub bit_depth: u32,
    /// Number of scales of the multi-scale product.
    pub scales: u32,
    /// Exponent of the luminance term at the coarsest scale.
    pub eta: f64,
    /// Exponent of each contrast/structure factor.
    pub tau: f64,
    pub mode: SsimMode,
    /// Window side length (windowed mode).
    pub window_size: usize,
    /// Gaussian sigma of the window (windowed mode).
    pub window_sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            bit_depth: 8,
            scales: 3,
            eta: 1.0,
            tau: 1.0,
            mode: SsimMode::Windowed,
            window_size: 11,
            window_sigma: 1.5,
        }
    }
}

impl SsimParams {
    pub fn global() -> Self {
        Self { mode: SsimMode::Global, ..Self::default() }
    }

    /// Intensity scale `L = 2^bit_depth - 1`.
    pub fn dynamic_range(&self) -> f64 {
        (1u64 << self.bit_depth) as f64 - 1.0
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.k1.is_finite() && self.k2.is_finite()) {
            return Err(LossError::InvalidParameter("k1 and k2 must be positive".into()));
        }
        if self.bit_depth == 0 || self.bit_depth > 32 {
            return Err(LossError::InvalidParameter("bit_depth must be in 1..=32".into()));
        }
        if self.scales == 0 {
            return Err(LossError::InvalidParameter("scales must be at least 1".into()));
        }
        if self.window_size < 3 || self.window_size.is_multiple_of(2) {
            return Err(LossError::InvalidParameter("window_size must be odd and >= 3".into()));
        }
        if !self.window_sigma.is_finite() || self.window_sigma <= 0.0 {
            return Err(LossError::InvalidParameter("window_sigma must be positive".into()));
        }
        Ok(())
    }

    /// Minimum plane dimension a single-scale evaluation needs.
    fn min_dim_single(&self) -> usize {
        match self.mode {
            SsimMode::Global => 1,
            SsimMode::Windowed => self.window_size,
        }
    }

    /// Minimum plane dimension the full multi-scale recursion needs:
    /// `2^(scales-1)` halvings on top of the per-scale footprint
    /// (at least 2 in global mode so the coarsest plane keeps 2x2 pixels).
    fn min_dim_multiscale(&self) -> usize {
        let base = match self.mode {
            SsimMode::Global => 2,
            SsimMode::Windowed => self.window_size,
        };
        base << (self.scales - 1)
    }
}

/// One scaled plane per channel.
type PlaneSet<T> = [Vec<T>; 3];

/// Channel-averaged comparison terms of one plane pair.
struct SsimAggregates<T> {
    /// Mean luminance term.
    l: T,
    /// Mean contrast/structure term.
    cs: T,
    /// Mean of the local products `l * cs` (equals `l * cs` in global mode).
    product: T,
}

fn check_shapes<T: Real>(x: &HdrImage<T>, y: &HdrImage<T>) -> Result<(), LossError> {
    if x.shape() != y.shape() {
        return Err(LossError::ShapeMismatch {
            left: x.shape(),
            right: y.shape(),
        });
    }
    Ok(())
}

/// Splits an image into per-channel planes scaled by `scale`.
fn split_planes<T: Real>(image: &HdrImage<T>, scale: T) -> PlaneSet<T> {
    let len = image.width() * image.height();
    let mut planes = [
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    ];
    for px in image.pixels().chunks_exact(3) {
        for (plane, &v) in planes.iter_mut().zip(px) {
            plane.push(v * scale);
        }
    }
    planes
}

fn gaussian_kernel<T: Real>(size: usize, sigma: f64) -> Vec<T> {
    let center = (size / 2) as f64;
    let mut weights: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    weights.iter().map(|&w| real(w)).collect()
}

/// Separable valid-mode convolution with a symmetric 1-D kernel.
fn convolve_valid<T: Real>(plane: &[T], h: usize, w: usize, kernel: &[T]) -> Vec<T> {
    let k = kernel.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    // Horizontal pass.
    let mut tmp = vec![T::zero(); h * ow];
    for row in 0..h {
        let src = &plane[row * w..(row + 1) * w];
        let dst = &mut tmp[row * ow..(row + 1) * ow];
        for (x, slot) in dst.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (t, &kv) in kernel.iter().enumerate() {
                acc = acc + kv * src[x + t];
            }
            *slot = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![T::zero(); oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = T::zero();
            for (t, &kv) in kernel.iter().enumerate() {
                acc = acc + kv * tmp[(y + t) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Comparison terms of one channel pair, window-averaged.
fn windowed_channel<T: Real>(
    xs: &[T],
    ys: &[T],
    h: usize,
    w: usize,
    kernel: &[T],
    c1: T,
    c2: T,
) -> SsimAggregates<T> {
    let two = real::<T>(2.0);
    let xx: Vec<T> = xs.iter().map(|&v| v * v).collect();
    let yy: Vec<T> = ys.iter().map(|&v| v * v).collect();
    let xy: Vec<T> = xs.iter().zip(ys).map(|(&a, &b)| a * b).collect();

    let mx = convolve_valid(xs, h, w, kernel);
    let my = convolve_valid(ys, h, w, kernel);
    let mxx = convolve_valid(&xx, h, w, kernel);
    let myy = convolve_valid(&yy, h, w, kernel);
    let mxy = convolve_valid(&xy, h, w, kernel);

    let mut sum_l = T::zero();
    let mut sum_cs = T::zero();
    let mut sum_product = T::zero();
    for i in 0..mx.len() {
        let vx = mxx[i] - mx[i] * mx[i];
        let vy = myy[i] - my[i] * my[i];
        let cov = mxy[i] - mx[i] * my[i];
        let l = (two * mx[i] * my[i] + c1) / (mx[i] * mx[i] + my[i] * my[i] + c1);
        let cs = (two * cov + c2) / (vx + vy + c2);
        sum_l = sum_l + l;
        sum_cs = sum_cs + cs;
        sum_product = sum_product + l * cs;
    }
    let count = real::<T>(mx.len() as f64);
    SsimAggregates { l: sum_l / count, cs: sum_cs / count, product: sum_product / count }
}

/// Comparison terms of one channel pair from whole-plane moments.
fn global_channel<T: Real>(xs: &[T], ys: &[T], c1: T, c2: T) -> SsimAggregates<T> {
    let two = real::<T>(2.0);
    let n = real::<T>(xs.len() as f64);
    let mx = xs.iter().cloned().sum::<T>() / n;
    let my = ys.iter().cloned().sum::<T>() / n;
    let mut vx = T::zero();
    let mut vy = T::zero();
    let mut cov = T::zero();
    for (&a, &b) in xs.iter().zip(ys) {
        let dx = a - mx;
        let dy = b - my;
        vx = vx + dx * dx;
        vy = vy + dy * dy;
        cov = cov + dx * dy;
    }
    vx = vx / n;
    vy = vy / n;
    cov = cov / n;

    let l = (two * mx * my + c1) / (mx * mx + my * my + c1);
    let cs = (two * cov + c2) / (vx + vy + c2);
    SsimAggregates { l, cs, product: l * cs }
}

/// Channel-averaged terms for a plane pair at its current resolution.
fn components_on_planes<T: Real>(
    xs: &PlaneSet<T>,
    ys: &PlaneSet<T>,
    h: usize,
    w: usize,
    params: &SsimParams,
) -> SsimAggregates<T> {
    let range = params.dynamic_range();
    let c1: T = real((params.k1 * range).powi(2));
    let c2: T = real((params.k2 * range).powi(2));
    let kernel = match params.mode {
        SsimMode::Windowed => gaussian_kernel::<T>(params.window_size, params.window_sigma),
        SsimMode::Global => Vec::new(),
    };

    let mut sums = SsimAggregates { l: T::zero(), cs: T::zero(), product: T::zero() };
    for (xp, yp) in xs.iter().zip(ys) {
        let agg = match params.mode {
            SsimMode::Global => global_channel(xp, yp, c1, c2),
            SsimMode::Windowed => windowed_channel(xp, yp, h, w, &kernel, c1, c2),
        };
        sums.l = sums.l + agg.l;
        sums.cs = sums.cs + agg.cs;
        sums.product = sums.product + agg.product;
    }
    let channels = real::<T>(3.0);
    SsimAggregates {
        l: sums.l / channels,
        cs: sums.cs / channels,
        product: sums.product / channels,
    }
}

/// 2x2 average pooling with stride 2; odd trailing rows/columns are dropped.
pub(crate) fn avg_pool_half<T: Real>(plane: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
    let oh = h / 2;
    let ow = w / 2;
    let quarter = real::<T>(0.25);
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            let s = plane[i] + plane[i + 1] + plane[i + w] + plane[i + w + 1];
            out.push(s * quarter);
        }
    }
    (out, oh, ow)
}

fn prepared_planes<T: Real>(
    x: &HdrImage<T>,
    y: &HdrImage<T>,
    params: &SsimParams,
    min_dim: usize,
) -> Result<(PlaneSet<T>, PlaneSet<T>), LossError> {
    check_shapes(x, y)?;
    params.validate()?;
    let smallest = x.width().min(x.height());
    if smallest < min_dim {
        return Err(LossError::TooSmall { needed: min_dim, got: smallest });
    }
    let scale: T = real(params.dynamic_range());
    Ok((split_planes(x, scale), split_planes(y, scale)))
}

/// Channel-averaged luminance and contrast/structure terms `(l, cs)` of one
/// plane pair. Swapping `x` and `y` leaves the result unchanged.
pub fn ssim_components<T: Real>(
    x: &HdrImage<T>,
    y: &HdrImage<T>,
    params: &SsimParams,
) -> Result<(T, T), LossError> {
    let (xs, ys) = prepared_planes(x, y, params, params.min_dim_single())?;
    let agg = components_on_planes(&xs, &ys, x.height(), x.width(), params);
    Ok((agg.l, agg.cs))
}

/// Single-scale similarity index: the mean of the local `l * cs` products
/// (whole-plane product in global mode), channel-averaged.
pub fn ssim<T: Real>(
    x: &HdrImage<T>,
    y: &HdrImage<T>,
    params: &SsimParams,
) -> Result<T, LossError> {
    let (xs, ys) = prepared_planes(x, y, params, params.min_dim_single())?;
    let agg = components_on_planes(&xs, &ys, x.height(), x.width(), params);
    Ok(agg.product)
}

fn pow_term<T: Real>(base: T, exponent: f64) -> T {
    if exponent == 1.0 {
        base
    } else {
        base.powf(real(exponent))
    }
}

/// Multi-scale similarity `l_M^eta * prod_k cs_k^tau`: contrast/structure
/// terms are collected at every scale, the luminance term only at the
/// coarsest, with 2x2 average pooling between scales.
pub fn ms_ssim<T: Real>(
    x: &HdrImage<T>,
    y: &HdrImage<T>,
    params: &SsimParams,
) -> Result<T, LossError> {
    let (mut xs, mut ys) = prepared_planes(x, y, params, params.min_dim_multiscale())?;
    let (mut h, mut w) = (x.height(), x.width());

    let mut result = T::one();
    for scale in 1..=params.scales {
        let agg = components_on_planes(&xs, &ys, h, w, params);
        result = result * pow_term(agg.cs, params.tau);
        if scale == params.scales {
            result = result * pow_term(agg.l, params.eta);
        } else {
            let mut next_dims = (0, 0);
            for plane in xs.iter_mut().chain(ys.iter_mut()) {
                let (pooled, nh, nw) = avg_pool_half(plane, h, w);
                *plane = pooled;
                next_dims = (nh, nw);
            }
            (h, w) = next_dims;
        }
    }
    Ok(result)
}
