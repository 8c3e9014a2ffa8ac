//! Canonical in-memory data model: ground truth, detections, datasets, and
//! the 13 challenge categories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Polygon;

/// The three problem groups the challenge taxonomy is organized under, plus
/// the catch-all for unexplained failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeGroup {
    IntraInstance,
    InterInstance,
    Background,
    Other,
}

impl ChallengeGroup {
    pub fn label(self) -> &'static str {
        match self {
            ChallengeGroup::IntraInstance => "Intra-instance",
            ChallengeGroup::InterInstance => "Inter-instance",
            ChallengeGroup::Background => "Background",
            ChallengeGroup::Other => "Others",
        }
    }
}

/// The 13 long-tailed challenge categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeCategory {
    Blurred,
    Artistic,
    Glass,
    SingleChar,
    Distorted,
    Inverse,
    Delimited,
    Dense,
    Overlapped,
    Occluded,
    LowContrast,
    ComplexBackground,
    Others,
}

impl ChallengeCategory {
    pub const ALL: [ChallengeCategory; 13] = [
        ChallengeCategory::Blurred,
        ChallengeCategory::Artistic,
        ChallengeCategory::Glass,
        ChallengeCategory::SingleChar,
        ChallengeCategory::Distorted,
        ChallengeCategory::Inverse,
        ChallengeCategory::Delimited,
        ChallengeCategory::Dense,
        ChallengeCategory::Overlapped,
        ChallengeCategory::Occluded,
        ChallengeCategory::LowContrast,
        ChallengeCategory::ComplexBackground,
        ChallengeCategory::Others,
    ];

    /// Column order of the published per-category result tables, which list
    /// Inverse before Distorted within the intra-instance block.
    pub const TABLE_ORDER: [ChallengeCategory; 13] = [
        ChallengeCategory::Blurred,
        ChallengeCategory::Artistic,
        ChallengeCategory::Glass,
        ChallengeCategory::SingleChar,
        ChallengeCategory::Inverse,
        ChallengeCategory::Distorted,
        ChallengeCategory::Delimited,
        ChallengeCategory::Dense,
        ChallengeCategory::Overlapped,
        ChallengeCategory::Occluded,
        ChallengeCategory::LowContrast,
        ChallengeCategory::ComplexBackground,
        ChallengeCategory::Others,
    ];

    pub fn group(self) -> ChallengeGroup {
        match self {
            ChallengeCategory::Blurred
            | ChallengeCategory::Artistic
            | ChallengeCategory::Glass
            | ChallengeCategory::SingleChar
            | ChallengeCategory::Distorted
            | ChallengeCategory::Inverse
            | ChallengeCategory::Delimited => ChallengeGroup::IntraInstance,
            ChallengeCategory::Dense | ChallengeCategory::Overlapped => {
                ChallengeGroup::InterInstance
            }
            ChallengeCategory::Occluded
            | ChallengeCategory::LowContrast
            | ChallengeCategory::ComplexBackground => ChallengeGroup::Background,
            ChallengeCategory::Others => ChallengeGroup::Other,
        }
    }

    /// Canonical lowercase tag used in the JSON schema and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            ChallengeCategory::Blurred => "blurred",
            ChallengeCategory::Artistic => "artistic",
            ChallengeCategory::Glass => "glass",
            ChallengeCategory::SingleChar => "single_char",
            ChallengeCategory::Distorted => "distorted",
            ChallengeCategory::Inverse => "inverse",
            ChallengeCategory::Delimited => "delimited",
            ChallengeCategory::Dense => "dense",
            ChallengeCategory::Overlapped => "overlapped",
            ChallengeCategory::Occluded => "occluded",
            ChallengeCategory::LowContrast => "low_contrast",
            ChallengeCategory::ComplexBackground => "complex_background",
            ChallengeCategory::Others => "others",
        }
    }

    /// Human-readable column header for tables.
    pub fn label(self) -> &'static str {
        match self {
            ChallengeCategory::Blurred => "Blurred",
            ChallengeCategory::Artistic => "Artistic",
            ChallengeCategory::Glass => "Glass",
            ChallengeCategory::SingleChar => "Single-Char",
            ChallengeCategory::Distorted => "Distorted",
            ChallengeCategory::Inverse => "Inverse",
            ChallengeCategory::Delimited => "Delimited",
            ChallengeCategory::Dense => "Dense",
            ChallengeCategory::Overlapped => "Overlapped",
            ChallengeCategory::Occluded => "Occluded",
            ChallengeCategory::LowContrast => "Low-Contrast",
            ChallengeCategory::ComplexBackground => "Complex-BG",
            ChallengeCategory::Others => "Others",
        }
    }
}

impl std::str::FromStr for ChallengeCategory {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, UnknownTag> {
        ChallengeCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownTag(s.to_string()))
    }
}

impl fmt::Display for ChallengeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownTag(pub String);

impl fmt::Display for UnknownTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown tag: {:?}", self.0)
    }
}

impl std::error::Error for UnknownTag {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Script {
    Latin,
    NonLatin,
    Mixed,
    #[default]
    Unknown,
}

impl Script {
    pub fn as_str(self) -> &'static str {
        match self {
            Script::Latin => "latin",
            Script::NonLatin => "non_latin",
            Script::Mixed => "mixed",
            Script::Unknown => "unknown",
        }
    }
}

impl std::str::FromStr for Script {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, UnknownTag> {
        match s {
            "latin" => Ok(Script::Latin),
            "non_latin" => Ok(Script::NonLatin),
            "mixed" => Ok(Script::Mixed),
            "unknown" => Ok(Script::Unknown),
            other => Err(UnknownTag(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unsplit,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unsplit => "unsplit",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, UnknownTag> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "unsplit" => Ok(Split::Unsplit),
            other => Err(UnknownTag(other.to_string())),
        }
    }
}

/// One annotated text region.
///
/// `transcription` never holds the literal don't-care marker `###`; parsers
/// decode that marker to `care = false` with no transcription.
#[derive(Debug, Clone, PartialEq)]
pub struct TextInstance {
    pub polygon: Polygon,
    pub care: bool,
    pub transcription: Option<String>,
    pub categories: BTreeSet<ChallengeCategory>,
    pub word_level: bool,
    pub script: Script,
}

impl TextInstance {
    pub fn new(polygon: Polygon, care: bool, transcription: Option<String>) -> Self {
        TextInstance {
            polygon,
            care,
            transcription,
            categories: BTreeSet::new(),
            word_level: true,
            script: Script::Unknown,
        }
    }

    pub fn with_categories<I: IntoIterator<Item = ChallengeCategory>>(mut self, cats: I) -> Self {
        self.categories = cats.into_iter().collect();
        self
    }

    /// Demote to a don't-care region, keeping the polygon so it still
    /// suppresses spurious detections during evaluation.
    pub fn demoted(mut self) -> Self {
        self.care = false;
        self
    }
}

/// True when every character is a basic Latin letter, digit, ASCII
/// punctuation mark, or space. This is the conservative alphabet the
/// cleaning and English-only filters treat as Latin text.
pub fn is_latin_transcription(text: &str) -> bool {
    text.chars()
        .all(|c| c == ' ' || c.is_ascii_alphanumeric() || c.is_ascii_punctuation())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnnotation {
    pub image_id: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub source_dataset: String,
    pub instances: Vec<TextInstance>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub name: String,
    pub split: Split,
    pub images: Vec<ImageAnnotation>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, split: Split) -> Self {
        DatasetManifest {
            name: name.into(),
            split,
            images: Vec::new(),
        }
    }

    pub fn sort_images(&mut self) {
        self.images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageAnnotation> {
        self.images.iter().find(|im| im.image_id == image_id)
    }

    pub fn total_instances(&self) -> usize {
        self.images.iter().map(|im| im.instances.len()).sum()
    }
}

/// A polygon predicted by a detector, optionally with a confidence score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPolygon {
    pub polygon: Polygon,
    pub score: Option<f64>,
}

/// One detector's predictions, keyed by image id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub detector_name: String,
    pub per_image: BTreeMap<String, Vec<ScoredPolygon>>,
}

impl DetectionSet {
    pub fn new(detector_name: impl Into<String>) -> Self {
        DetectionSet {
            detector_name: detector_name.into(),
            per_image: BTreeMap::new(),
        }
    }

    pub fn polygons_for(&self, image_id: &str) -> Vec<Polygon> {
        self.per_image
            .get(image_id)
            .map(|v| v.iter().map(|s| s.polygon.clone()).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

/// A validation or parse finding. Diagnostics report problems without
/// aborting whole-dataset operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    /// Where the problem is: an image id, JSON path, or input line.
    pub context: Option<String>,
}

impl Diagnostic {
    pub fn warning(message: impl Into<String>, context: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
            context: Some(context.into()),
        }
    }

    pub fn error(message: impl Into<String>, context: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            context: Some(context.into()),
        }
    }
}

/// Structural checks on an assembled manifest: duplicate ids, vertices far
/// outside the image rectangle, and empty images.
///
/// Degenerate or self-intersecting polygons cannot be represented in a
/// constructed manifest; the parsers report those at parse time.
pub fn validate_manifest(manifest: &DatasetManifest) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = BTreeSet::new();
    for image in &manifest.images {
        if !seen.insert(image.image_id.as_str()) {
            diags.push(Diagnostic::error("duplicate image_id", &image.image_id));
        }
        if image.instances.is_empty() {
            diags.push(Diagnostic::warning(
                "image has no instances",
                &image.image_id,
            ));
        }
        let (w, h) = (image.width as f64, image.height as f64);
        let (margin_x, margin_y) = (0.05 * w, 0.05 * h);
        for (idx, inst) in image.instances.iter().enumerate() {
            let out_of_bounds = inst.polygon.vertices().iter().any(|p| {
                p.x < -margin_x || p.x > w + margin_x || p.y < -margin_y || p.y > h + margin_y
            });
            if out_of_bounds {
                diags.push(Diagnostic::warning(
                    format!("instance {idx} has vertices more than 5% outside the image"),
                    &image.image_id,
                ));
            }
        }
    }
    diags
}

/// Per-category tallies over care instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCount {
    /// Images containing at least one care instance of the category.
    pub images: usize,
    /// Care instances carrying the category.
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_images: usize,
    pub care_instances: usize,
    pub dontcare_instances: usize,
    /// Total challenge attributes over care instances; a multi-label
    /// instance counts once per category it carries.
    pub total_attributes: usize,
    /// `total_attributes / care_instances`, 0 when there are no care
    /// instances.
    pub mean_attributes: f64,
    pub per_category: BTreeMap<ChallengeCategory, CategoryCount>,
}

impl StatsReport {
    /// Combine tallies from disjoint manifests; the mean is recomputed from
    /// the summed numerator and denominator.
    pub fn combine(&self, other: &StatsReport) -> StatsReport {
        let mut per_category = self.per_category.clone();
        for (cat, count) in &other.per_category {
            let entry = per_category.entry(*cat).or_default();
            entry.images += count.images;
            entry.instances += count.instances;
        }
        let care = self.care_instances + other.care_instances;
        let attributes = self.total_attributes + other.total_attributes;
        StatsReport {
            total_images: self.total_images + other.total_images,
            care_instances: care,
            dontcare_instances: self.dontcare_instances + other.dontcare_instances,
            total_attributes: attributes,
            mean_attributes: if care > 0 {
                attributes as f64 / care as f64
            } else {
                0.0
            },
            per_category,
        }
    }
}

/// Distribution statistics for a manifest: per-category image and instance
/// counts, care/don't-care totals, and the mean number of challenge
/// attributes per care instance.
pub fn dataset_stats(manifest: &DatasetManifest) -> StatsReport {
    let mut per_category: BTreeMap<ChallengeCategory, CategoryCount> = BTreeMap::new();
    let mut care = 0usize;
    let mut dontcare = 0usize;
    let mut attributes = 0usize;
    for image in &manifest.images {
        let mut cats_in_image = BTreeSet::new();
        for inst in &image.instances {
            if inst.care {
                care += 1;
                attributes += inst.categories.len();
                for cat in &inst.categories {
                    per_category.entry(*cat).or_default().instances += 1;
                    cats_in_image.insert(*cat);
                }
            } else {
                dontcare += 1;
            }
        }
        for cat in cats_in_image {
            per_category.entry(cat).or_default().images += 1;
        }
    }
    StatsReport {
        total_images: manifest.images.len(),
        care_instances: care,
        dontcare_instances: dontcare,
        total_attributes: attributes,
        mean_attributes: if care > 0 {
            attributes as f64 / care as f64
        } else {
            0.0
        },
        per_category,
    }
}
