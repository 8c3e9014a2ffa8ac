pub mod brloss;
pub mod convert;
pub mod dedup;
pub mod eval;
pub mod filter;
pub mod gap;
pub mod merge;
pub mod stats;

use std::path::Path;

use anyhow::Context;
use lttext::formats::ParseMode;
use lttext::model::{DatasetManifest, DetectionSet, Diagnostic, Severity};
use lttext::report::OutputFormat;

use crate::{CliError, CliResult, Ctx};

pub fn parse_mode(ctx: &Ctx) -> ParseMode {
    if ctx.strict() {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

pub fn output_format(ctx: &Ctx) -> Result<OutputFormat, CliError> {
    ctx.format_name()
        .parse::<OutputFormat>()
        .map_err(CliError::Usage)
}

/// Write the primary report to `--out` or stdout.
pub fn emit(ctx: &Ctx, content: &str) -> CliResult {
    match ctx.out() {
        Some(path) => {
            std::fs::write(path, content)
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

pub fn write_file(path: &Path, content: &str) -> CliResult {
    std::fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn log_diagnostics(diags: &[Diagnostic]) {
    for d in diags {
        let context = d.context.as_deref().unwrap_or("-");
        match d.severity {
            Severity::Warning => log::warn!("{context}: {}", d.message),
            Severity::Error => log::error!("{context}: {}", d.message),
        }
    }
}

pub fn load_manifest(path: &Path, mode: ParseMode) -> Result<DatasetManifest, CliError> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let (manifest, diags) = lttext::formats::parse_canonical(&bytes, mode)
        .with_context(|| format!("cannot parse {}", path.display()))?;
    log_diagnostics(&diags);
    Ok(manifest)
}

pub fn load_detections(path: &Path, mode: ParseMode) -> Result<DetectionSet, CliError> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let (det, diags) = lttext::formats::parse_detections_json(&bytes, mode)
        .with_context(|| format!("cannot parse {}", path.display()))?;
    log_diagnostics(&diags);
    Ok(det)
}

/// Sorted *.txt files of a directory.
pub fn txt_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
    let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    Ok(files)
}

/// File stem with an optional prefix stripped: `gt_img_1.txt` -> `img_1`.
pub fn image_id_from(path: &Path, strip_prefix: &str) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    stem.strip_prefix(strip_prefix).unwrap_or(stem).to_string()
}
