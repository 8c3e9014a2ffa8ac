use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use lttext::builder::{dedup_hashes, dedup_images, DedupConfig, DedupOutput};

use crate::{CliError, CliResult, Ctx};

use super::{emit, log_diagnostics, write_file};

#[derive(Debug, Args)]
pub struct DedupArgs {
    /// Directory of images to hash and compare.
    #[arg(long, conflicts_with = "hashes")]
    images: Option<PathBuf>,

    /// Precomputed hashes instead of images: one `image_id,16-hex-digit`
    /// line per image.
    #[arg(long)]
    hashes: Option<PathBuf>,

    /// Pairs with similarity strictly above this are duplicates.
    #[arg(long)]
    threshold: Option<f64>,

    /// Compare every pair instead of hash-byte blocking.
    #[arg(long)]
    exact: bool,

    /// Write the duplicate pair CSV here (default: stdout).
    #[arg(long)]
    out_pairs: Option<PathBuf>,

    /// Write the survivor list here, one image id per line.
    #[arg(long)]
    out_survivors: Option<PathBuf>,
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "ppm", "pgm", "pbm", "pam"];

fn load_hash_file(path: &Path) -> Result<BTreeMap<String, u64>, CliError> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut hashes = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id, hex) = line.split_once(',').ok_or_else(|| {
            CliError::Data(anyhow::anyhow!(
                "{}:{}: expected image_id,hash",
                path.display(),
                idx + 1
            ))
        })?;
        let hash = u64::from_str_radix(hex.trim(), 16).map_err(|e| {
            CliError::Data(anyhow::anyhow!(
                "{}:{}: bad hash: {e}",
                path.display(),
                idx + 1
            ))
        })?;
        hashes.insert(id.trim().to_string(), hash);
    }
    Ok(hashes)
}

fn pairs_csv(output: &DedupOutput) -> String {
    let mut text = String::from("id_a,id_b,similarity\n");
    for pair in &output.pairs {
        let _ = writeln!(text, "{},{},{}", pair.id_a, pair.id_b, pair.similarity);
    }
    text
}

pub fn run(ctx: &Ctx, args: &DedupArgs) -> CliResult {
    let threshold = args
        .threshold
        .or(ctx.config.dedup.threshold)
        .unwrap_or(0.95);
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CliError::Usage(
            "--threshold must lie in (0, 1]".to_string(),
        ));
    }
    let cfg = DedupConfig {
        similarity_threshold: threshold,
        exact: args.exact || ctx.config.dedup.exact.unwrap_or(false),
        ..Default::default()
    };

    let output = match (&args.images, &args.hashes) {
        (Some(dir), None) => {
            let mut files: Vec<(String, PathBuf)> = std::fs::read_dir(dir)
                .with_context(|| format!("cannot read directory {}", dir.display()))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension().and_then(|e| e.to_str()).is_some_and(|e| {
                        IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str())
                    })
                })
                .map(|p| (super::image_id_from(&p, ""), p))
                .collect();
            files.sort();
            dedup_images(&files, &cfg).context("dedup failed")?
        }
        (None, Some(path)) => {
            let hashes = load_hash_file(path)?;
            dedup_hashes(&hashes, &cfg).context("dedup failed")?
        }
        _ => {
            return Err(CliError::Usage(
                "dedup needs exactly one of --images or --hashes".to_string(),
            ))
        }
    };
    log_diagnostics(&output.diagnostics);

    if let Some(path) = &args.out_survivors {
        let mut text = output.survivors.join("\n");
        text.push('\n');
        write_file(path, &text)?;
    }
    let csv = pairs_csv(&output);
    match &args.out_pairs {
        Some(path) => write_file(path, &csv),
        None => emit(ctx, &csv),
    }
}
