use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use lttext::formats::{
    convert_coco_text, parse_detection_txt, parse_icdar_gt, parse_total_text, write_canonical,
    write_detections,
};
use lttext::model::{
    validate_manifest, DatasetManifest, DetectionSet, ImageAnnotation, Split, TextInstance,
};

use crate::{CliError, CliResult, Ctx};

use super::{emit, image_id_from, log_diagnostics, parse_mode, txt_files};

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Source format: icdar, total-text, coco-text, or det-txt.
    #[arg(long)]
    from: String,

    /// Source file (coco-text) or directory of per-image txt files.
    #[arg(long)]
    input: PathBuf,

    /// Dataset name to stamp on the manifest.
    #[arg(long, default_value = "converted")]
    name: String,

    /// Declared split of the converted manifest.
    #[arg(long, default_value = "unsplit")]
    split: String,

    /// COCO-style subset to export (train, val, or test).
    #[arg(long)]
    subset: Option<String>,

    /// CSV of image dimensions: image_id,width,height per line.
    #[arg(long)]
    sizes: Option<PathBuf>,

    /// Fallback image dimensions as WIDTHxHEIGHT when --sizes has no entry.
    #[arg(long, default_value = "1280x720")]
    default_size: String,

    /// Filename prefix stripped to obtain the image id (defaults per
    /// format: gt_ for icdar, poly_gt_ for total-text, res_ for det-txt).
    #[arg(long)]
    strip_prefix: Option<String>,

    /// Detector name for det-txt conversion.
    #[arg(long)]
    detector: Option<String>,
}

fn parse_size(text: &str) -> Result<(u32, u32), CliError> {
    let parts: Vec<&str> = text.split('x').collect();
    let parsed = (parts.len() == 2)
        .then(|| Some((parts[0].parse::<u32>().ok()?, parts[1].parse::<u32>().ok()?)))
        .flatten();
    match parsed {
        Some((w, h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(CliError::Usage(format!(
            "--default-size must look like 1280x720, got {text:?}"
        ))),
    }
}

fn load_sizes(path: &Path) -> Result<BTreeMap<String, (u32, u32)>, CliError> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut sizes = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (fields.len() == 3)
            .then(|| {
                Some((
                    fields[1].parse::<u32>().ok()?,
                    fields[2].parse::<u32>().ok()?,
                ))
            })
            .flatten();
        match parsed {
            Some(dims) => {
                sizes.insert(fields[0].to_string(), dims);
            }
            None => {
                return Err(CliError::Data(anyhow::anyhow!(
                    "{}:{}: expected image_id,width,height",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok(sizes)
}

pub fn run(ctx: &Ctx, args: &ConvertArgs) -> CliResult {
    let mode = parse_mode(ctx);
    let split: Split = args
        .split
        .parse()
        .map_err(|e| CliError::Usage(format!("--split: {e}")))?;

    match args.from.as_str() {
        "icdar" | "total-text" => {
            let default_prefix = if args.from == "icdar" {
                "gt_"
            } else {
                "poly_gt_"
            };
            let prefix = args.strip_prefix.as_deref().unwrap_or(default_prefix);
            let default_size = parse_size(&args.default_size)?;
            let sizes = match &args.sizes {
                Some(path) => load_sizes(path)?,
                None => BTreeMap::new(),
            };
            let mut manifest = DatasetManifest::new(args.name.clone(), split);
            for file in txt_files(&args.input)? {
                let bytes = std::fs::read(&file)
                    .with_context(|| format!("cannot read {}", file.display()))?;
                let parsed: Result<(Vec<TextInstance>, _), _> = if args.from == "icdar" {
                    parse_icdar_gt(&bytes, mode)
                } else {
                    parse_total_text(&bytes, mode)
                };
                let (instances, diags) =
                    parsed.with_context(|| format!("cannot parse {}", file.display()))?;
                log_diagnostics(&diags);
                let image_id = image_id_from(&file, prefix);
                let (width, height) = sizes.get(&image_id).copied().unwrap_or(default_size);
                manifest.images.push(ImageAnnotation {
                    file_name: format!("{image_id}.jpg"),
                    image_id,
                    width,
                    height,
                    source_dataset: args.name.clone(),
                    instances,
                });
            }
            manifest.sort_images();
            log_diagnostics(&validate_manifest(&manifest));
            emit(ctx, &write_canonical(&manifest))
        }
        "coco-text" => {
            let bytes = std::fs::read(&args.input)
                .with_context(|| format!("cannot read {}", args.input.display()))?;
            let (mut manifest, diags) =
                convert_coco_text(&bytes, &args.name, args.subset.as_deref(), mode)
                    .with_context(|| format!("cannot convert {}", args.input.display()))?;
            log_diagnostics(&diags);
            if args.subset.is_none() {
                manifest.split = split;
            }
            manifest.sort_images();
            log_diagnostics(&validate_manifest(&manifest));
            emit(ctx, &write_canonical(&manifest))
        }
        "det-txt" => {
            let detector = args.detector.as_deref().ok_or_else(|| {
                CliError::Usage("det-txt conversion needs --detector".to_string())
            })?;
            let prefix = args.strip_prefix.as_deref().unwrap_or("res_");
            let mut det = DetectionSet::new(detector);
            for file in txt_files(&args.input)? {
                let bytes = std::fs::read(&file)
                    .with_context(|| format!("cannot read {}", file.display()))?;
                let (polygons, diags) = parse_detection_txt(&bytes, mode)
                    .with_context(|| format!("cannot parse {}", file.display()))?;
                log_diagnostics(&diags);
                det.per_image.insert(image_id_from(&file, prefix), polygons);
            }
            emit(ctx, &write_detections(&det))
        }
        other => Err(CliError::Usage(format!(
            "--from must be icdar, total-text, coco-text, or det-txt, got {other:?}"
        ))),
    }
}
