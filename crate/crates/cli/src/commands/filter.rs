use std::path::PathBuf;

use clap::Args;
use lttext::builder::{filter_output_to_manifest, filter_undetected, FilterConfig};
use lttext::formats::write_canonical;

use crate::{CliError, CliResult, Ctx};

use super::{emit, load_detections, load_manifest, parse_mode, write_file};

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Canonical ground-truth manifest.
    #[arg(long)]
    gt: PathBuf,

    /// Canonical detection JSON; repeat once per detector.
    #[arg(long, required = true)]
    det: Vec<PathBuf>,

    /// Instances with max IoU below this against the joint predictions are
    /// kept as undetected.
    #[arg(long)]
    iou_thresh: Option<f64>,

    /// Write the filtered manifest here (retained instances care, the rest
    /// don't-care).
    #[arg(long)]
    out_manifest: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct FilterReport {
    iou_threshold: f64,
    total_images: usize,
    images_with_undetected: Vec<String>,
    undetected_counts: std::collections::BTreeMap<String, usize>,
    total_undetected: usize,
}

pub fn run(ctx: &Ctx, args: &FilterArgs) -> CliResult {
    let iou_thresh = args
        .iou_thresh
        .or(ctx.config.filter_undetected.iou_thresh)
        .unwrap_or(0.5);
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(CliError::Usage(
            "--iou-thresh must lie in (0, 1]".to_string(),
        ));
    }
    let mode = parse_mode(ctx);
    let manifest = load_manifest(&args.gt, mode)?;
    let detections = args
        .det
        .iter()
        .map(|p| load_detections(p, mode))
        .collect::<Result<Vec<_>, _>>()?;

    let cfg = FilterConfig {
        iou_threshold: iou_thresh,
    };
    let output = filter_undetected(&detections, &manifest, &cfg);

    if let Some(path) = &args.out_manifest {
        let filtered = filter_output_to_manifest(&manifest, &output);
        write_file(path, &write_canonical(&filtered))?;
    }

    let report = FilterReport {
        iou_threshold: cfg.iou_threshold,
        total_images: manifest.images.len(),
        images_with_undetected: output.images_with_undetected.clone(),
        undetected_counts: output
            .undetected
            .iter()
            .map(|(id, list)| (id.clone(), list.len()))
            .collect(),
        total_undetected: output.total_instances(),
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(ctx, &text)
}
