use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use lttext::loss::{
    balanced_reconstruction_loss, loss_decomposition, GuidanceMap, ImageTensor, LossConfig,
};

use crate::{CliError, CliResult, Ctx};

use super::emit;

#[derive(Debug, Args)]
pub struct BrLossArgs {
    /// Original image (PNG or PPM).
    #[arg(long)]
    image: PathBuf,

    /// Reconstructed image, same dimensions.
    #[arg(long)]
    recon: PathBuf,

    /// Single-channel guidance mask; pixel values are scaled to [0, 1].
    #[arg(long)]
    mask: PathBuf,

    /// Balance factor for the text region.
    #[arg(long)]
    alpha: Option<f64>,

    /// Guidance threshold separating text from background.
    #[arg(long)]
    threshold: Option<f64>,

    /// Divide the sums by H*W*C for cross-resolution comparison.
    #[arg(long)]
    normalize: bool,
}

fn load_rgb_tensor(path: &Path) -> Result<ImageTensor, CliError> {
    let img = image::open(path)
        .with_context(|| format!("cannot decode {}", path.display()))?
        .to_rgb8();
    let (width, height) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    Ok(ImageTensor::new(height as usize, width as usize, 3, data).context("bad image tensor")?)
}

fn load_mask(path: &Path) -> Result<GuidanceMap, CliError> {
    let img = image::open(path)
        .with_context(|| format!("cannot decode {}", path.display()))?
        .to_luma8();
    let (width, height) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    Ok(GuidanceMap::new(height as usize, width as usize, data).context("bad guidance map")?)
}

#[derive(serde::Serialize)]
struct LossOutput {
    total: f64,
    text_term: f64,
    background_term: f64,
    alpha: f64,
    threshold: f64,
    normalized: bool,
}

pub fn run(ctx: &Ctx, args: &BrLossArgs) -> CliResult {
    let alpha = args.alpha.or(ctx.config.br_loss.alpha).unwrap_or(0.9);
    let threshold = args
        .threshold
        .or(ctx.config.br_loss.threshold)
        .unwrap_or(0.1);
    let normalize = args.normalize || ctx.config.br_loss.normalize.unwrap_or(false);
    let cfg = LossConfig::new(alpha, threshold).map_err(|e| CliError::Usage(e.to_string()))?;
    let image = load_rgb_tensor(&args.image)?;
    let recon = load_rgb_tensor(&args.recon)?;
    let mask = load_mask(&args.mask)?;

    let total = balanced_reconstruction_loss(&image, &recon, &mask, &cfg)
        .context("loss computation failed")?;
    let (text_term, background_term) =
        loss_decomposition(&image, &recon, &mask, &cfg).context("loss computation failed")?;

    let scale = if normalize {
        1.0 / (image.height() * image.width() * image.channels()) as f64
    } else {
        1.0
    };
    let output = LossOutput {
        total: total * scale,
        text_term: text_term * scale,
        background_term: background_term * scale,
        alpha,
        threshold,
        normalized: normalize,
    };
    let mut text = serde_json::to_string_pretty(&output)?;
    text.push('\n');
    emit(ctx, &text)
}
