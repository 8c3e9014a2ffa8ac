//! Numerical reference kernel for the pixel-level balanced reconstruction
//! loss.
//!
//! A guidance map is thresholded into text and background regions; each
//! pixel's squared reconstruction error is weighted by `alpha` in the text
//! region and `1 - alpha` in the background, and the weighted errors are
//! summed over the image. The kernel exists to verify training-side
//! implementations, so reductions are bit-stable: contributions are summed
//! pairwise in row-major order.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LossError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("data length {got} does not match {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("values must be finite")]
    NonFinite,
    #[error("alpha must lie in [0, 1]")]
    BadAlpha,
}

/// Dense H x W x C tensor of finite values, row-major with channels
/// innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, LossError> {
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(LossError::BadLength {
                got: data.len(),
                expected,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFinite);
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn constant(
        height: usize,
        width: usize,
        channels: usize,
        value: f64,
    ) -> Result<Self, LossError> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        self.data[(row * self.width + col) * self.channels + channel] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// H x W map of per-pixel text likelihood. Values are typically in [0, 1]
/// but any finite values are accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GuidanceMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, LossError> {
        let expected = height * width;
        if data.len() != expected {
            return Err(LossError::BadLength {
                got: data.len(),
                expected,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFinite);
        }
        Ok(GuidanceMap {
            height,
            width,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self, LossError> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Balance factor weighting the text region; the background gets
    /// `1 - alpha`.
    pub alpha: f64,
    /// Guidance threshold separating text (strictly above) from background
    /// (at or below).
    pub threshold: f64,
}

impl LossConfig {
    pub fn new(alpha: f64, threshold: f64) -> Result<Self, LossError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(LossError::BadAlpha);
        }
        Ok(LossConfig { alpha, threshold })
    }
}

impl Default for LossConfig {
    /// The defaults reported to work best: alpha 0.9, threshold 0.1.
    fn default() -> Self {
        LossConfig {
            alpha: 0.9,
            threshold: 0.1,
        }
    }
}

fn check_dims(
    image: &ImageTensor,
    recon: &ImageTensor,
    guidance: &GuidanceMap,
) -> Result<(), LossError> {
    if image.height != recon.height
        || image.width != recon.width
        || image.channels != recon.channels
    {
        return Err(LossError::DimensionMismatch(format!(
            "image {}x{}x{} vs reconstruction {}x{}x{}",
            image.height, image.width, image.channels, recon.height, recon.width, recon.channels
        )));
    }
    if guidance.height != image.height || guidance.width != image.width {
        return Err(LossError::DimensionMismatch(format!(
            "guidance {}x{} vs image {}x{}",
            guidance.height, guidance.width, image.height, image.width
        )));
    }
    Ok(())
}

/// Binary text map: 1 where the guidance value is strictly above the
/// threshold, 0 otherwise. A pixel exactly at the threshold is background.
pub fn binarize_mask(guidance: &GuidanceMap, threshold: f64) -> Vec<u8> {
    guidance
        .data
        .iter()
        .map(|&v| u8::from(v > threshold))
        .collect()
}

/// Pairwise (cascade) summation; deterministic for a fixed input order and
/// far more accurate than naive accumulation on long inputs.
fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        n if n <= 8 => values.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Squared channel-difference sum at one pixel.
fn pixel_l2(image: &ImageTensor, recon: &ImageTensor, row: usize, col: usize) -> f64 {
    let mut sum = 0.0;
    for ch in 0..image.channels {
        let d = image.get(row, col, ch) - recon.get(row, col, ch);
        sum += d * d;
    }
    sum
}

/// The balanced reconstruction loss: per-pixel squared error weighted by
/// `alpha` over the text region and `1 - alpha` over the background, summed
/// over the whole image with no normalization.
pub fn balanced_reconstruction_loss(
    image: &ImageTensor,
    recon: &ImageTensor,
    guidance: &GuidanceMap,
    cfg: &LossConfig,
) -> Result<f64, LossError> {
    check_dims(image, recon, guidance)?;
    let mut contributions = Vec::with_capacity(image.height * image.width);
    for row in 0..image.height {
        for col in 0..image.width {
            let weight = if guidance.get(row, col) > cfg.threshold {
                cfg.alpha
            } else {
                1.0 - cfg.alpha
            };
            contributions.push(weight * pixel_l2(image, recon, row, col));
        }
    }
    Ok(pairwise_sum(&contributions))
}

/// The two summands of the loss: the alpha-weighted text-region term and
/// the (1 - alpha)-weighted background term. Their sum equals
/// [`balanced_reconstruction_loss`] up to summation rounding.
pub fn loss_decomposition(
    image: &ImageTensor,
    recon: &ImageTensor,
    guidance: &GuidanceMap,
    cfg: &LossConfig,
) -> Result<(f64, f64), LossError> {
    check_dims(image, recon, guidance)?;
    let pixels = image.height * image.width;
    let mut text = Vec::with_capacity(pixels);
    let mut background = Vec::with_capacity(pixels);
    for row in 0..image.height {
        for col in 0..image.width {
            let l2 = pixel_l2(image, recon, row, col);
            if guidance.get(row, col) > cfg.threshold {
                text.push(cfg.alpha * l2);
            } else {
                background.push((1.0 - cfg.alpha) * l2);
            }
        }
    }
    Ok((pairwise_sum(&text), pairwise_sum(&background)))
}
