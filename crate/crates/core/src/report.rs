//! Report emitters: JSON for machines, CSV for spreadsheets, Markdown
//! tables shaped like the published result tables.
//!
//! Percentages are rendered with one decimal place throughout, matching the
//! convention of the result tables this tooling reproduces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::eval::{evaluate, EvalConfig, EvalMode, EvalReport, GapMatrix};
use crate::model::{ChallengeCategory, DatasetManifest, DetectionSet, StatsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            other => Err(format!(
                "unknown format {other:?} (expected json, csv, or markdown)"
            )),
        }
    }
}

/// Fraction in [0, 1] rendered as a one-decimal percentage: 0.457 -> "45.7".
pub fn pct(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}

/// Already-scaled value rendered with one decimal: 89.0 -> "89.0".
pub fn fmt1(value: f64) -> String {
    format!("{value:.1}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("json encoding");
    out.push('\n');
    out
}

// ---------------------------------------------------------------------------
// Evaluation reports
// ---------------------------------------------------------------------------

pub fn render_eval(report: &EvalReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => {
            let mut out = String::from(
                "scope,true_positives,false_positives,false_negatives,precision,recall,f_measure\n",
            );
            let _ = writeln!(
                out,
                "overall,{},{},{},{},{},{}",
                report.true_positives,
                report.false_positives,
                report.false_negatives,
                pct(report.precision),
                pct(report.recall),
                pct(report.f_measure)
            );
            if let Some(per_category) = &report.per_category {
                for (cat, m) in per_category {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        cat.as_str(),
                        m.true_positives,
                        m.false_positives,
                        m.false_negatives,
                        pct(m.precision),
                        pct(m.recall),
                        pct(m.f_measure)
                    );
                }
            }
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::from(
                "| Scope | TP | FP | FN | P | R | F |\n|---|---|---|---|---|---|---|\n",
            );
            let _ = writeln!(
                out,
                "| overall | {} | {} | {} | {} | {} | {} |",
                report.true_positives,
                report.false_positives,
                report.false_negatives,
                pct(report.precision),
                pct(report.recall),
                pct(report.f_measure)
            );
            if let Some(per_category) = &report.per_category {
                for (cat, m) in per_category {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} | {} | {} | {} |",
                        cat.as_str(),
                        m.true_positives,
                        m.false_positives,
                        m.false_negatives,
                        pct(m.precision),
                        pct(m.recall),
                        pct(m.f_measure)
                    );
                }
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// Per-category comparison table
// ---------------------------------------------------------------------------

/// One detector's row: 13 per-category F-measures (None when the category
/// has no care instance in the ground truth) plus the Hard and Norm overall
/// columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryRow {
    pub detector: String,
    pub per_category: BTreeMap<ChallengeCategory, Option<f64>>,
    pub hard: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryTable {
    pub rows: Vec<CategoryRow>,
}

/// Evaluate every detector under all 13 category modes plus Hard and Norm.
pub fn build_category_table(
    gt: &DatasetManifest,
    detections: &[DetectionSet],
    cfg: &EvalConfig,
) -> CategoryTable {
    // Categories with no care instance anywhere are vacuous: their column
    // renders as a dash rather than a meaningless zero.
    let mut present: BTreeMap<ChallengeCategory, bool> = BTreeMap::new();
    for cat in ChallengeCategory::ALL {
        present.insert(cat, false);
    }
    for image in &gt.images {
        for inst in image.instances.iter().filter(|i| i.care) {
            for cat in &inst.categories {
                present.insert(*cat, true);
            }
        }
    }

    let rows = detections
        .iter()
        .map(|det| {
            let f_for = |mode: EvalMode| {
                evaluate(gt, det, &EvalConfig { mode, ..*cfg })
                    .report
                    .f_measure
            };
            let per_category = ChallengeCategory::ALL
                .into_iter()
                .map(|cat| {
                    let f = present[&cat].then(|| f_for(EvalMode::Category(cat)));
                    (cat, f)
                })
                .collect();
            CategoryRow {
                detector: det.detector_name.clone(),
                per_category,
                hard: f_for(EvalMode::Hard),
                norm: f_for(EvalMode::Norm),
            }
        })
        .collect();
    CategoryTable { rows }
}

pub fn render_category_table(table: &CategoryTable, format: OutputFormat) -> String {
    let order = ChallengeCategory::TABLE_ORDER;
    match format {
        OutputFormat::Json => to_json(table),
        OutputFormat::Csv => {
            let mut out = String::from("detector");
            for cat in order {
                let _ = write!(out, ",{}", cat.as_str());
            }
            out.push_str(",hard,norm\n");
            for row in &table.rows {
                out.push_str(&csv_field(&row.detector));
                for cat in order {
                    match row.per_category[&cat] {
                        Some(f) => {
                            let _ = write!(out, ",{}", pct(f));
                        }
                        None => out.push(','),
                    }
                }
                let _ = writeln!(out, ",{},{}", pct(row.hard), pct(row.norm));
            }
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::from("| Method |");
            for cat in order {
                let _ = write!(out, " {} |", cat.label());
            }
            out.push_str(" Hard | Norm |\n|---|");
            for _ in 0..order.len() + 2 {
                out.push_str("---|");
            }
            out.push('\n');
            for row in &table.rows {
                let _ = write!(out, "| {} |", row.detector);
                for cat in order {
                    match row.per_category[&cat] {
                        Some(f) => {
                            let _ = write!(out, " {} |", pct(f));
                        }
                        None => out.push_str(" \u{2014} |"),
                    }
                }
                let _ = writeln!(out, " {} | {} |", pct(row.hard), pct(row.norm));
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// Fine-tuning gap matrix
// ---------------------------------------------------------------------------

pub fn render_gap(matrix: &GapMatrix, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(matrix),
        OutputFormat::Csv => {
            let mut out = String::from("train,test,f_measure,gap\n");
            for row in &matrix.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},0.0",
                    csv_field(&row.train),
                    csv_field(&row.train),
                    fmt1(row.in_domain)
                );
                for cell in &row.cells {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        csv_field(&row.train),
                        csv_field(&cell.test),
                        fmt1(cell.f_measure),
                        fmt1(cell.gap)
                    );
                }
            }
            out
        }
        OutputFormat::Markdown => {
            let mut out =
                String::from("| Fine-tuned on | Evaluated on | F | Gap |\n|---|---|---|---|\n");
            for row in &matrix.rows {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | \u{2014} |",
                    row.train,
                    row.train,
                    fmt1(row.in_domain)
                );
                for cell in &row.cells {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} |",
                        row.train,
                        cell.test,
                        fmt1(cell.f_measure),
                        fmt1(cell.gap)
                    );
                }
            }
            if let Some(max) = &matrix.max_gap {
                let _ = writeln!(out, "\nMax gap: {} (on {})", fmt1(max.gap), max.test);
            }
            let _ = writeln!(out, "Mean gap: {}", fmt1(matrix.mean_gap));
            out
        }
    }
}

// ---------------------------------------------------------------------------
// Merge report
// ---------------------------------------------------------------------------

pub fn render_merge(report: &crate::merge::MergeReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => {
            let mut out = String::from("dataset,train,test,train_dropped_empty\n");
            for c in &report.per_dataset {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    csv_field(&c.name),
                    c.train_images,
                    c.test_images,
                    c.train_dropped_empty
                );
            }
            let _ = writeln!(out, "Total,{},{},", report.train_total, report.test_total);
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::from("| Dataset | Train | Test |\n|---|---|---|\n");
            for c in &report.per_dataset {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} |",
                    c.name, c.train_images, c.test_images
                );
            }
            let _ = writeln!(
                out,
                "| Total | {} | {} |",
                report.train_total, report.test_total
            );
            out
        }
    }
}

// ---------------------------------------------------------------------------
// Dataset statistics
// ---------------------------------------------------------------------------

pub fn render_stats(stats: &StatsReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(stats),
        OutputFormat::Csv => {
            let mut out = String::from("category,group,images,instances\n");
            for cat in ChallengeCategory::TABLE_ORDER {
                let count = stats.per_category.get(&cat).copied().unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    cat.as_str(),
                    cat.group().label(),
                    count.images,
                    count.instances
                );
            }
            let _ = writeln!(out, "total_images,,{},", stats.total_images);
            let _ = writeln!(out, "care_instances,,,{}", stats.care_instances);
            let _ = writeln!(out, "dontcare_instances,,,{}", stats.dontcare_instances);
            let _ = writeln!(out, "mean_attributes,,,{:.3}", stats.mean_attributes);
            out
        }
        OutputFormat::Markdown => {
            let mut out =
                String::from("| Category | Group | Images | Instances |\n|---|---|---|---|\n");
            for cat in ChallengeCategory::TABLE_ORDER {
                let count = stats.per_category.get(&cat).copied().unwrap_or_default();
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    cat.label(),
                    cat.group().label(),
                    count.images,
                    count.instances
                );
            }
            let _ = writeln!(out, "\nImages: {}", stats.total_images);
            let _ = writeln!(
                out,
                "Care instances: {} (don't care: {})",
                stats.care_instances, stats.dontcare_instances
            );
            let _ = writeln!(
                out,
                "Challenge attributes: {} ({:.3} per care instance)",
                stats.total_attributes, stats.mean_attributes
            );
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::model::{ImageAnnotation, ScoredPolygon, Split, TextInstance};

    #[test]
    fn pct_rounds_to_one_decimal() {
        assert_eq!(pct(0.457), "45.7");
        assert_eq!(pct(1.0), "100.0");
        assert_eq!(pct(0.0), "0.0");
        assert_eq!(fmt1(89.0 - 73.9), "15.1");
        assert_eq!(fmt1(88.2 - 77.8), "10.4");
    }

    fn tiny_fixture() -> (DatasetManifest, DetectionSet) {
        let mut tagged = TextInstance::new(
            Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap(),
            true,
            Some("a".to_string()),
        );
        tagged.categories.insert(ChallengeCategory::Blurred);
        let plain = TextInstance::new(
            Polygon::rect(20.0, 0.0, 30.0, 10.0).unwrap(),
            true,
            Some("b".to_string()),
        );
        let mut gt = DatasetManifest::new("d", Split::Test);
        gt.images.push(ImageAnnotation {
            image_id: "img".to_string(),
            file_name: "img.jpg".to_string(),
            width: 100,
            height: 100,
            source_dataset: "d".to_string(),
            instances: vec![tagged, plain],
        });
        let mut det = DetectionSet::new("perfect");
        det.per_image.insert(
            "img".to_string(),
            vec![
                ScoredPolygon {
                    polygon: Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap(),
                    score: None,
                },
                ScoredPolygon {
                    polygon: Polygon::rect(20.0, 0.0, 30.0, 10.0).unwrap(),
                    score: None,
                },
            ],
        );
        (gt, det)
    }

    #[test]
    fn category_table_perfect_detector() {
        let (gt, det) = tiny_fixture();
        let table = build_category_table(&gt, &[det], &EvalConfig::default());
        let row = &table.rows[0];
        assert_eq!(row.hard, 1.0);
        assert_eq!(row.norm, 1.0);
        assert_eq!(row.per_category[&ChallengeCategory::Blurred], Some(1.0));
        // No occluded instance exists, so the column is vacuous.
        assert_eq!(row.per_category[&ChallengeCategory::Occluded], None);
    }

    #[test]
    fn vacuous_category_renders_as_dash() {
        let (gt, det) = tiny_fixture();
        let table = build_category_table(&gt, &[det], &EvalConfig::default());
        let md = render_category_table(&table, OutputFormat::Markdown);
        assert!(md.contains('\u{2014}'));
        assert!(md.lines().next().unwrap().contains("| Hard | Norm |"));
        // Published column order puts Inverse before Distorted.
        let header = md.lines().next().unwrap();
        let inverse = header.find("Inverse").unwrap();
        let distorted = header.find("Distorted").unwrap();
        assert!(inverse < distorted);
    }

    #[test]
    fn gap_markdown_mentions_summary() {
        let mut cells = std::collections::BTreeMap::new();
        cells.insert(("TT".to_string(), "TT".to_string()), 89.0);
        cells.insert(("TT".to_string(), "IC15".to_string()), 73.9);
        let matrix = crate::eval::gap_report(&cells).unwrap();
        let md = render_gap(&matrix, OutputFormat::Markdown);
        assert!(md.contains("| TT | IC15 | 73.9 | 15.1 |"), "got:\n{md}");
        assert!(md.contains("Max gap: 15.1"));
    }
}
