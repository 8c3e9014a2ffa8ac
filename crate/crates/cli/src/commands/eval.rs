use std::path::PathBuf;

use clap::Args;
use lttext::eval::{evaluate_with_breakdown, EvalConfig, EvalMode};
use lttext::model::ChallengeCategory;
use lttext::report::{build_category_table, render_category_table, render_eval, OutputFormat};

use crate::{CliError, CliResult, Ctx};

use super::{emit, load_detections, load_manifest, log_diagnostics, output_format, parse_mode};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Canonical ground-truth manifest.
    #[arg(long)]
    gt: PathBuf,

    /// Canonical detection JSON; repeat for several detectors.
    #[arg(long, required = true)]
    det: Vec<PathBuf>,

    /// norm, hard, or category:<tag> (e.g. category:occluded).
    #[arg(long)]
    mode: Option<String>,

    /// IoU at or above which a (gt, prediction) pair can match.
    #[arg(long)]
    iou_thresh: Option<f64>,

    /// Overlap ratio at or above which a don't-care region suppresses a
    /// prediction.
    #[arg(long)]
    dontcare_thresh: Option<f64>,

    /// One row per detector with all 13 category columns plus Hard and Norm.
    #[arg(long)]
    all_categories: bool,

    /// Include a per-image count breakdown (json format only).
    #[arg(long)]
    per_image: bool,

    /// Include per-category metrics in the single-detector report.
    #[arg(long)]
    per_category: bool,
}

pub fn parse_eval_mode(text: &str) -> Result<EvalMode, CliError> {
    match text {
        "norm" => Ok(EvalMode::Norm),
        "hard" => Ok(EvalMode::Hard),
        other => match other.strip_prefix("category:") {
            Some(tag) => tag
                .parse::<ChallengeCategory>()
                .map(EvalMode::Category)
                .map_err(|e| CliError::Usage(format!("--mode: {e}"))),
            None => Err(CliError::Usage(format!(
                "--mode must be norm, hard, or category:<tag>, got {other:?}"
            ))),
        },
    }
}

pub fn run(ctx: &Ctx, args: &EvalArgs) -> CliResult {
    let iou_thresh = args
        .iou_thresh
        .or(ctx.config.eval.iou_thresh)
        .unwrap_or(0.5);
    let dontcare_thresh = args
        .dontcare_thresh
        .or(ctx.config.eval.dontcare_thresh)
        .unwrap_or(0.5);
    if !(0.0..=1.0).contains(&iou_thresh) || iou_thresh == 0.0 {
        return Err(CliError::Usage(
            "--iou-thresh must lie in (0, 1]".to_string(),
        ));
    }
    if !(0.0..=1.0).contains(&dontcare_thresh) || dontcare_thresh == 0.0 {
        return Err(CliError::Usage(
            "--dontcare-thresh must lie in (0, 1]".to_string(),
        ));
    }
    let format = output_format(ctx)?;
    let mode_name = args
        .mode
        .as_deref()
        .or(ctx.config.eval.mode.as_deref())
        .unwrap_or("norm");
    let mode = parse_eval_mode(mode_name)?;
    let cfg = EvalConfig {
        iou_threshold: iou_thresh,
        dontcare_overlap_threshold: dontcare_thresh,
        mode,
    };

    let parse = parse_mode(ctx);
    let gt = load_manifest(&args.gt, parse)?;
    let detections = args
        .det
        .iter()
        .map(|path| load_detections(path, parse))
        .collect::<Result<Vec<_>, _>>()?;

    if args.all_categories {
        let table = build_category_table(&gt, &detections, &cfg);
        return emit(ctx, &render_category_table(&table, format));
    }

    if detections.len() == 1 {
        let out =
            evaluate_with_breakdown(&gt, &detections[0], &cfg, args.per_category, args.per_image);
        log_diagnostics(&out.diagnostics);
        emit(ctx, &render_eval(&out.report, format))
    } else {
        // Several detectors without the category table: one report each,
        // keyed by detector name.
        match format {
            OutputFormat::Json => {
                let mut map = serde_json::Map::new();
                for det in &detections {
                    let out =
                        evaluate_with_breakdown(&gt, det, &cfg, args.per_category, args.per_image);
                    log_diagnostics(&out.diagnostics);
                    map.insert(
                        det.detector_name.clone(),
                        serde_json::to_value(&out.report)?,
                    );
                }
                let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(map))?;
                text.push('\n');
                emit(ctx, &text)
            }
            _ => {
                let mut text = String::new();
                for det in &detections {
                    let out =
                        evaluate_with_breakdown(&gt, det, &cfg, args.per_category, args.per_image);
                    log_diagnostics(&out.diagnostics);
                    text.push_str(&format!("# {}\n", det.detector_name));
                    text.push_str(&render_eval(&out.report, format));
                    text.push('\n');
                }
                emit(ctx, &text)
            }
        }
    }
}
