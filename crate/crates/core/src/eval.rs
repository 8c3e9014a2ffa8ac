//! One-to-one IoU matching and precision/recall/F-measure, with the Norm,
//! Hard, and per-category protocols plus the cross-dataset gap report.
//!
//! Matching follows the ICDAR2015 convention: predictions overlapping a
//! don't-care region are removed from evaluation first, then care ground
//! truth and remaining predictions are matched greedily in descending IoU
//! order, one-to-one. Counts are micro-aggregated over images.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{intersection_over_first, iou, Polygon};
use crate::model::{ChallengeCategory, DatasetManifest, DetectionSet, Diagnostic, ImageAnnotation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no in-domain result for fine-tune dataset {0:?}")]
    MissingDiagonal(String),
}

/// Which instances count as care during an evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Original annotations unchanged.
    Norm,
    /// Only challenge-tagged instances that were originally care stay care.
    Hard,
    /// Only instances carrying the given category (and originally care)
    /// stay care.
    Category(ChallengeCategory),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub dontcare_overlap_threshold: f64,
    pub mode: EvalMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_threshold: 0.5,
            dontcare_overlap_threshold: 0.5,
            mode: EvalMode::Norm,
        }
    }
}

impl EvalConfig {
    pub fn with_mode(mode: EvalMode) -> Self {
        EvalConfig {
            mode,
            ..Default::default()
        }
    }
}

/// Per-image matching outcome.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Matched (gt index, prediction index, IoU) triples, in match order.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Prediction indices removed by don't-care suppression.
    pub suppressed: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_category: Option<BTreeMap<ChallengeCategory, CategoryMetrics>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_image: Option<BTreeMap<String, Counts>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub diagnostics: Vec<Diagnostic>,
}

/// precision = TP/(TP+FP), recall = TP/(TP+FN), both 0 on 0/0.
pub fn precision_recall_f(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f)
}

/// Rewrite care flags for the requested protocol. Norm is the identity;
/// Hard keeps an instance care only when it carries at least one challenge
/// category and was originally care; Category(c) additionally requires the
/// given category. Everything else becomes a don't-care region.
pub fn relabel_for_mode(gt: &ImageAnnotation, mode: EvalMode) -> ImageAnnotation {
    match mode {
        EvalMode::Norm => gt.clone(),
        EvalMode::Hard | EvalMode::Category(_) => {
            let mut out = gt.clone();
            for inst in &mut out.instances {
                let keep = match mode {
                    EvalMode::Hard => !inst.categories.is_empty(),
                    EvalMode::Category(c) => inst.categories.contains(&c),
                    EvalMode::Norm => unreachable!(),
                };
                inst.care = inst.care && keep;
            }
            out
        }
    }
}

/// Match one image's predictions against its (already relabeled) ground
/// truth.
pub fn match_image(gt: &ImageAnnotation, preds: &[Polygon], cfg: &EvalConfig) -> MatchResult {
    let care: Vec<(usize, &Polygon)> = gt
        .instances
        .iter()
        .enumerate()
        .filter(|(_, inst)| inst.care)
        .map(|(i, inst)| (i, &inst.polygon))
        .collect();
    let dontcare: Vec<&Polygon> = gt
        .instances
        .iter()
        .filter(|inst| !inst.care)
        .map(|inst| &inst.polygon)
        .collect();

    // Step 1: suppress predictions overlapping a don't-care region. They
    // count as neither true nor false positives.
    let mut suppressed = Vec::new();
    let mut active: Vec<(usize, &Polygon)> = Vec::with_capacity(preds.len());
    for (j, pred) in preds.iter().enumerate() {
        let hit = dontcare
            .iter()
            .any(|d| intersection_over_first(pred, d) >= cfg.dontcare_overlap_threshold);
        if hit {
            suppressed.push(j);
        } else {
            active.push((j, pred));
        }
    }

    // Step 2: greedy one-to-one matching, candidates sorted by IoU
    // descending with (gt index, pred index) tie-break.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for &(gi, gpoly) in &care {
        for &(pj, ppoly) in &active {
            let overlap = iou(gpoly, ppoly);
            if overlap >= cfg.iou_threshold {
                candidates.push((overlap, gi, pj));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut gt_matched: BTreeMap<usize, ()> = BTreeMap::new();
    let mut pred_matched: BTreeMap<usize, ()> = BTreeMap::new();
    let mut pairs = Vec::new();
    for (overlap, gi, pj) in candidates {
        if !gt_matched.contains_key(&gi) && !pred_matched.contains_key(&pj) {
            gt_matched.insert(gi, ());
            pred_matched.insert(pj, ());
            pairs.push((gi, pj, overlap));
        }
    }

    let true_positives = pairs.len();
    MatchResult {
        true_positives,
        false_positives: active.len() - true_positives,
        false_negatives: care.len() - true_positives,
        pairs,
        suppressed,
    }
}

/// Evaluate a detector over a whole manifest: micro-aggregated counts, then
/// precision/recall/F. Images without predictions count as zero predictions;
/// predictions for image ids absent from the ground truth are ignored with a
/// warning.
pub fn evaluate(gt: &DatasetManifest, det: &DetectionSet, cfg: &EvalConfig) -> EvalOutput {
    evaluate_with_breakdown(gt, det, cfg, false, false)
}

pub fn evaluate_with_breakdown(
    gt: &DatasetManifest,
    det: &DetectionSet,
    cfg: &EvalConfig,
    per_category: bool,
    per_image: bool,
) -> EvalOutput {
    let mut diagnostics = Vec::new();
    for id in det.per_image.keys() {
        if gt.image(id).is_none() {
            diagnostics.push(Diagnostic::warning(
                format!(
                    "predictions for unknown image ignored (detector {})",
                    det.detector_name
                ),
                id.clone(),
            ));
        }
    }

    let mut images: Vec<&ImageAnnotation> = gt.images.iter().collect();
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let per_image_counts = run_matching(&images, det, cfg);
    let mut report = aggregate(&images, &per_image_counts, per_image);

    if per_category {
        let mut map = BTreeMap::new();
        for cat in ChallengeCategory::ALL {
            let cat_cfg = EvalConfig {
                mode: EvalMode::Category(cat),
                ..*cfg
            };
            let counts = run_matching(&images, det, &cat_cfg);
            let r = aggregate(&images, &counts, false);
            map.insert(
                cat,
                CategoryMetrics {
                    true_positives: r.true_positives,
                    false_positives: r.false_positives,
                    false_negatives: r.false_negatives,
                    precision: r.precision,
                    recall: r.recall,
                    f_measure: r.f_measure,
                },
            );
        }
        report.per_category = Some(map);
    }
    EvalOutput {
        report,
        diagnostics,
    }
}

/// Per-image matching is pure, so the images can be fanned out to any number
/// of worker threads; collecting back into image order keeps every schedule
/// byte-identical.
fn run_matching(images: &[&ImageAnnotation], det: &DetectionSet, cfg: &EvalConfig) -> Vec<Counts> {
    images
        .par_iter()
        .map(|image| {
            let preds = det.polygons_for(&image.image_id);
            let relabeled = relabel_for_mode(image, cfg.mode);
            let m = match_image(&relabeled, &preds, cfg);
            Counts {
                true_positives: m.true_positives,
                false_positives: m.false_positives,
                false_negatives: m.false_negatives,
            }
        })
        .collect()
}

fn aggregate(images: &[&ImageAnnotation], counts: &[Counts], keep_per_image: bool) -> EvalReport {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for c in counts {
        tp += c.true_positives;
        fp += c.false_positives;
        fn_ += c.false_negatives;
    }
    let (precision, recall, f_measure) = precision_recall_f(tp, fp, fn_);
    let per_image = keep_per_image.then(|| {
        images
            .iter()
            .zip(counts)
            .map(|(im, c)| (im.image_id.clone(), *c))
            .collect()
    });
    EvalReport {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision,
        recall,
        f_measure,
        per_category: None,
        per_image,
    }
}

// ---------------------------------------------------------------------------
// Fine-tuning gap report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCell {
    pub test: String,
    pub f_measure: f64,
    /// In-domain F minus this cell's F.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub train: String,
    pub in_domain: f64,
    pub cells: Vec<GapCell>,
}

/// Cross-evaluation matrix with per-row gaps. Values keep the unit they
/// were supplied in (published tables use percentages).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapMatrix {
    pub rows: Vec<GapRow>,
    /// Largest gap over all off-diagonal cells.
    pub max_gap: Option<GapCell>,
    /// Mean gap over all off-diagonal cells, 0 when there are none.
    pub mean_gap: f64,
}

impl GapMatrix {
    pub fn gap(&self, train: &str, test: &str) -> Option<f64> {
        let row = self.rows.iter().find(|r| r.train == train)?;
        row.cells.iter().find(|c| c.test == test).map(|c| c.gap)
    }
}

/// Build the gap matrix from cross-evaluation cells keyed by
/// (fine-tune dataset, evaluation dataset). Every fine-tune dataset must
/// have its in-domain cell present.
pub fn gap_report(cells: &BTreeMap<(String, String), f64>) -> Result<GapMatrix, EvalError> {
    let mut trains: Vec<&String> = cells.keys().map(|(train, _)| train).collect();
    trains.sort();
    trains.dedup();

    let mut rows = Vec::new();
    let mut all_gaps: Vec<(String, GapCell)> = Vec::new();
    for train in trains {
        let in_domain = *cells
            .get(&(train.clone(), train.clone()))
            .ok_or_else(|| EvalError::MissingDiagonal(train.clone()))?;
        let mut row_cells = Vec::new();
        for ((t, test), &f) in cells {
            if t != train || test == train {
                continue;
            }
            let cell = GapCell {
                test: test.clone(),
                f_measure: f,
                gap: in_domain - f,
            };
            all_gaps.push((train.clone(), cell.clone()));
            row_cells.push(cell);
        }
        rows.push(GapRow {
            train: train.clone(),
            in_domain,
            cells: row_cells,
        });
    }

    let max_gap = all_gaps
        .iter()
        .max_by(|a, b| a.1.gap.total_cmp(&b.1.gap))
        .map(|(_, c)| c.clone());
    let mean_gap = if all_gaps.is_empty() {
        0.0
    } else {
        all_gaps.iter().map(|(_, c)| c.gap).sum::<f64>() / all_gaps.len() as f64
    };
    Ok(GapMatrix {
        rows,
        max_gap,
        mean_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::model::{Split, TextInstance};

    fn image(instances: Vec<TextInstance>) -> ImageAnnotation {
        ImageAnnotation {
            image_id: "img".to_string(),
            file_name: "img.jpg".to_string(),
            width: 1000,
            height: 1000,
            source_dataset: "t".to_string(),
            instances,
        }
    }

    fn care_square(x: f64, y: f64, size: f64) -> TextInstance {
        TextInstance::new(Polygon::rect(x, y, x + size, y + size).unwrap(), true, None)
    }

    fn dontcare_square(x: f64, y: f64, size: f64) -> TextInstance {
        TextInstance::new(
            Polygon::rect(x, y, x + size, y + size).unwrap(),
            false,
            None,
        )
    }

    #[test]
    fn perfect_detector() {
        let gt = image(vec![
            care_square(0.0, 0.0, 10.0),
            care_square(50.0, 0.0, 10.0),
        ]);
        let preds: Vec<Polygon> = gt.instances.iter().map(|i| i.polygon.clone()).collect();
        let m = match_image(&gt, &preds, &EvalConfig::default());
        assert_eq!(
            (m.true_positives, m.false_positives, m.false_negatives),
            (2, 0, 0)
        );
    }

    #[test]
    fn one_match_one_miss() {
        // 2 care GT, 1 pred overlapping the first at IoU 10/12.5 = 0.8.
        let gt = image(vec![
            care_square(0.0, 0.0, 10.0),
            care_square(50.0, 0.0, 10.0),
        ]);
        let pred = Polygon::rect(0.0, 0.0, 10.0, 12.5).unwrap();
        let m = match_image(&gt, &[pred], &EvalConfig::default());
        assert_eq!(
            (m.true_positives, m.false_positives, m.false_negatives),
            (1, 0, 1)
        );
        let (p, r, f) = precision_recall_f(1, 0, 1);
        assert_eq!(p, 1.0);
        assert_eq!(r, 0.5);
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dontcare_suppression() {
        // A prediction fully inside a don't-care region counts as nothing.
        let gt = image(vec![dontcare_square(0.0, 0.0, 20.0)]);
        let pred = Polygon::rect(5.0, 5.0, 10.0, 10.0).unwrap();
        let m = match_image(&gt, &[pred], &EvalConfig::default());
        assert_eq!(
            (m.true_positives, m.false_positives, m.false_negatives),
            (0, 0, 0)
        );
        assert_eq!(m.suppressed, vec![0]);
    }

    #[test]
    fn relabel_norm_is_identity() {
        let gt = image(vec![
            care_square(0.0, 0.0, 10.0),
            dontcare_square(20.0, 0.0, 10.0),
        ]);
        assert_eq!(relabel_for_mode(&gt, EvalMode::Norm), gt);
    }

    #[test]
    fn relabel_hard_keeps_only_tagged_care() {
        use ChallengeCategory::Blurred;
        let mut tagged = care_square(0.0, 0.0, 10.0);
        tagged.categories.insert(Blurred);
        let gt = image(vec![
            tagged,
            care_square(20.0, 0.0, 10.0),
            care_square(40.0, 0.0, 10.0),
        ]);
        let relabeled = relabel_for_mode(&gt, EvalMode::Hard);
        let care_flags: Vec<bool> = relabeled.instances.iter().map(|i| i.care).collect();
        assert_eq!(care_flags, vec![true, false, false]);
    }

    #[test]
    fn relabel_category_requires_both() {
        use ChallengeCategory::{Blurred, Occluded};
        let mut both = care_square(0.0, 0.0, 10.0);
        both.categories.extend([Blurred, Occluded]);
        let mut blurred_only = care_square(20.0, 0.0, 10.0);
        blurred_only.categories.insert(Blurred);
        let mut tagged_dontcare = dontcare_square(40.0, 0.0, 10.0);
        tagged_dontcare.categories.insert(Occluded);
        let gt = image(vec![both, blurred_only, tagged_dontcare]);
        let relabeled = relabel_for_mode(&gt, EvalMode::Category(Occluded));
        let care_flags: Vec<bool> = relabeled.instances.iter().map(|i| i.care).collect();
        // Occluded + originally care stays care; blurred-only is demoted;
        // originally-don't-care stays don't-care even though tagged.
        assert_eq!(care_flags, vec![true, false, false]);
    }

    #[test]
    fn micro_aggregation() {
        // (1,0,1) and (1,1,0) micro-sum to TP=2 FP=1 FN=1: P=2/3, R=2/3.
        let mut gt = DatasetManifest::new("d", Split::Test);
        let mut im1 = image(vec![
            care_square(0.0, 0.0, 10.0),
            care_square(50.0, 0.0, 10.0),
        ]);
        im1.image_id = "a".to_string();
        let mut im2 = image(vec![care_square(0.0, 0.0, 10.0)]);
        im2.image_id = "b".to_string();
        gt.images = vec![im1, im2];

        let mut det = DetectionSet::new("det");
        det.per_image.insert(
            "a".to_string(),
            vec![crate::model::ScoredPolygon {
                polygon: Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap(),
                score: None,
            }],
        );
        det.per_image.insert(
            "b".to_string(),
            vec![
                crate::model::ScoredPolygon {
                    polygon: Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap(),
                    score: None,
                },
                crate::model::ScoredPolygon {
                    polygon: Polygon::rect(500.0, 500.0, 510.0, 510.0).unwrap(),
                    score: None,
                },
            ],
        );

        let out = evaluate(&gt, &det, &EvalConfig::default());
        let r = &out.report;
        assert_eq!(
            (r.true_positives, r.false_positives, r.false_negatives),
            (2, 1, 1)
        );
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f_measure - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_detections_score_zero() {
        let mut gt = DatasetManifest::new("d", Split::Test);
        gt.images = vec![image(vec![care_square(0.0, 0.0, 10.0)])];
        let det = DetectionSet::new("det");
        let out = evaluate(&gt, &det, &EvalConfig::default());
        assert_eq!(out.report.precision, 0.0);
        assert_eq!(out.report.recall, 0.0);
        assert_eq!(out.report.f_measure, 0.0);
    }

    #[test]
    fn unknown_image_warned() {
        let mut gt = DatasetManifest::new("d", Split::Test);
        gt.images = vec![image(vec![care_square(0.0, 0.0, 10.0)])];
        let mut det = DetectionSet::new("det");
        det.per_image.insert("ghost".to_string(), vec![]);
        let out = evaluate(&gt, &det, &EvalConfig::default());
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn gap_report_published_rows() {
        let mut cells = BTreeMap::new();
        cells.insert(("TT".to_string(), "TT".to_string()), 89.0);
        cells.insert(("TT".to_string(), "IC15".to_string()), 73.9);
        cells.insert(("IC15".to_string(), "IC15".to_string()), 88.2);
        cells.insert(("IC15".to_string(), "TT".to_string()), 77.8);
        let matrix = gap_report(&cells).unwrap();
        assert!((matrix.gap("TT", "IC15").unwrap() - 15.1).abs() < 1e-9);
        assert!((matrix.gap("IC15", "TT").unwrap() - 10.4).abs() < 1e-9);
    }

    #[test]
    fn gap_zero_when_equal() {
        let mut cells = BTreeMap::new();
        cells.insert(("A".to_string(), "A".to_string()), 50.0);
        cells.insert(("A".to_string(), "B".to_string()), 50.0);
        let matrix = gap_report(&cells).unwrap();
        assert_eq!(matrix.gap("A", "B"), Some(0.0));
        assert_eq!(matrix.mean_gap, 0.0);
    }

    #[test]
    fn gap_missing_diagonal() {
        let mut cells = BTreeMap::new();
        cells.insert(("A".to_string(), "B".to_string()), 50.0);
        let err = gap_report(&cells).unwrap_err();
        assert_eq!(err, EvalError::MissingDiagonal("A".to_string()));
    }
}
