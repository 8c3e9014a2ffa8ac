//! Evaluation and benchmark-construction toolkit for scene text detection.
//!
//! The crate is organized around a small set of pipelines that all share one
//! canonical annotation model:
//!
//! - [`geometry`]: exact polygon arithmetic (area, intersection, IoU) for
//!   arbitrary simple polygons, convex or not.
//! - [`model`]: ground truth, detections, datasets, and the 13 challenge
//!   categories.
//! - [`formats`]: canonical JSON readers/writers plus ICDAR-style text
//!   parsers and reference converters.
//! - [`eval`]: one-to-one IoU matching, precision/recall/F-measure, the
//!   Norm/Hard/per-category protocols, and cross-dataset gap reports.
//! - [`builder`]: detector-assisted filtering of undetected instances and
//!   the cleaning passes (non-Latin removal, word-level enforcement, image
//!   deduplication).
//! - [`merge`]: deterministic train/test splitting and multi-dataset union.
//! - [`loss`]: a numerical reference kernel for the balanced reconstruction
//!   loss used to pretrain detection backbones.
//! - [`report`]: JSON / CSV / Markdown emitters for every report type.

pub mod builder;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod loss;
pub mod merge;
pub mod model;
pub mod report;

pub use eval::{EvalConfig, EvalMode, EvalReport, GapMatrix};
pub use geometry::{Point, Polygon};
pub use model::{
    ChallengeCategory, ChallengeGroup, DatasetManifest, DetectionSet, ImageAnnotation, Script,
    Split, TextInstance,
};
