//! Joint-dataset construction: per-dataset train/test splitting and the
//! union of many datasets into one train and one test manifest.
//!
//! Ratio splits are deterministic by default: images are ordered by id and
//! the train side takes the first floor(fraction * N). The published split
//! counts are reproduced exactly by this rule. A seeded shuffle order is
//! available for research use and is just as reproducible.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::model::{is_latin_transcription, DatasetManifest, ImageAnnotation, Script, Split};

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("split of dataset {0:?} would leave an empty side")]
    EmptySplit(String),
    #[error("duplicate dataset name {0:?} in plan")]
    DuplicateDatasetName(String),
    #[error("duplicate namespaced image id {0:?}")]
    DuplicateNamespacedId(String),
    #[error("dataset {name:?}: {message}")]
    BadPlanEntry { name: String, message: String },
    #[error("cannot read plan: {0}")]
    PlanIo(#[from] std::io::Error),
    #[error("cannot parse plan: {0}")]
    PlanSyntax(String),
    #[error("cannot load manifest {path}: {message}")]
    ManifestLoad { path: String, message: String },
}

/// How a ratio split orders images before cutting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitOrder {
    /// Ascending image id; fully reproducible with no extra state.
    #[default]
    ById,
    /// Fisher-Yates shuffle driven by a splitmix64 stream, so a given seed
    /// produces the same split everywhere, forever.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitPolicy {
    /// The dataset already declares its train/test membership.
    KeepOriginal,
    RatioSplit {
        train_fraction: f64,
        order: SplitOrder,
    },
    /// Drop images without English text, then ratio-split the remainder.
    EnglishOnlyThenRatio {
        train_fraction: f64,
        order: SplitOrder,
    },
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn order_images(mut images: Vec<ImageAnnotation>, order: SplitOrder) -> Vec<ImageAnnotation> {
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    if let SplitOrder::Shuffled { seed } = order {
        let mut state = seed;
        for i in (1..images.len()).rev() {
            let j = (splitmix64(&mut state) % (i as u64 + 1)) as usize;
            images.swap(i, j);
        }
    }
    images
}

/// Split one dataset according to its policy.
///
/// For ratio splits the train side takes exactly floor(train_fraction * N)
/// images and neither side may end up empty. KeepOriginal routes the whole
/// manifest to the side its declared split names.
pub fn split_dataset(
    manifest: &DatasetManifest,
    policy: &SplitPolicy,
) -> Result<(DatasetManifest, DatasetManifest), MergeError> {
    let make = |split: Split, images: Vec<ImageAnnotation>| DatasetManifest {
        name: manifest.name.clone(),
        split,
        images,
    };
    match policy {
        SplitPolicy::KeepOriginal => match manifest.split {
            Split::Train => Ok((
                make(Split::Train, manifest.images.clone()),
                make(Split::Test, vec![]),
            )),
            Split::Test => Ok((
                make(Split::Train, vec![]),
                make(Split::Test, manifest.images.clone()),
            )),
            Split::Unsplit => Err(MergeError::BadPlanEntry {
                name: manifest.name.clone(),
                message: "keep_original requires a declared train or test split".to_string(),
            }),
        },
        SplitPolicy::RatioSplit {
            train_fraction,
            order,
        } => ratio_split(manifest, *train_fraction, *order, &make),
        SplitPolicy::EnglishOnlyThenRatio {
            train_fraction,
            order,
        } => {
            let filtered = english_only_filter(manifest);
            ratio_split(&filtered, *train_fraction, *order, &make)
        }
    }
}

fn ratio_split(
    manifest: &DatasetManifest,
    train_fraction: f64,
    order: SplitOrder,
    make: &impl Fn(Split, Vec<ImageAnnotation>) -> DatasetManifest,
) -> Result<(DatasetManifest, DatasetManifest), MergeError> {
    let images = order_images(manifest.images.clone(), order);
    let n = images.len();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(MergeError::EmptySplit(manifest.name.clone()));
    }
    let mut train = images;
    let test = train.split_off(n_train);
    Ok((make(Split::Train, train), make(Split::Test, test)))
}

/// Keep only images containing at least one English instance: declared
/// latin script, or a transcription made of basic Latin characters.
pub fn english_only_filter(manifest: &DatasetManifest) -> DatasetManifest {
    let mut out = DatasetManifest::new(manifest.name.clone(), manifest.split);
    out.images = manifest
        .images
        .iter()
        .filter(|image| {
            image.instances.iter().any(|inst| {
                inst.script == Script::Latin
                    || (inst.script != Script::NonLatin
                        && inst
                            .transcription
                            .as_deref()
                            .is_some_and(is_latin_transcription))
            })
        })
        .cloned()
        .collect();
    out
}

/// One dataset's manifests as referenced by a merge plan.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// A single manifest the policy will split.
    Single(DatasetManifest),
    /// Pre-split train/test manifests (keep_original).
    Pair {
        train: DatasetManifest,
        test: DatasetManifest,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeInput {
    pub name: String,
    pub policy: SplitPolicy,
    pub source: DatasetSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergePlan {
    /// Name stamped on the output manifests.
    pub name: String,
    pub inputs: Vec<MergeInput>,
    /// Drop train images without any text instance.
    pub require_at_least_one_instance: bool,
}

impl Default for MergePlan {
    fn default() -> Self {
        MergePlan {
            name: "joint".to_string(),
            inputs: Vec::new(),
            require_at_least_one_instance: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DatasetContribution {
    pub name: String,
    pub train_images: usize,
    pub test_images: usize,
    /// Train images dropped by the at-least-one-instance filter.
    pub train_dropped_empty: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MergeReport {
    pub per_dataset: Vec<DatasetContribution>,
    pub train_total: usize,
    pub test_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOutput {
    pub train: DatasetManifest,
    pub test: DatasetManifest,
    pub report: MergeReport,
}

/// Union the per-dataset splits into one train and one test manifest.
///
/// Image ids are namespaced as `<dataset>/<original id>` so ids from
/// different datasets can never collide; output images are sorted by the
/// namespaced id, making the result independent of plan order.
pub fn build_joint(plan: &MergePlan) -> Result<JointOutput, MergeError> {
    let mut names = BTreeSet::new();
    for input in &plan.inputs {
        if !names.insert(input.name.as_str()) {
            return Err(MergeError::DuplicateDatasetName(input.name.clone()));
        }
    }

    let mut train = DatasetManifest::new(plan.name.clone(), Split::Train);
    let mut test = DatasetManifest::new(plan.name.clone(), Split::Test);
    let mut per_dataset = Vec::new();
    for input in &plan.inputs {
        let (train_part, test_part) = match &input.source {
            DatasetSource::Single(manifest) => split_dataset(manifest, &input.policy)?,
            DatasetSource::Pair { train, test } => (train.clone(), test.clone()),
        };
        let mut dropped = 0usize;
        let mut train_images = Vec::new();
        for image in train_part.images {
            if plan.require_at_least_one_instance && image.instances.is_empty() {
                dropped += 1;
                continue;
            }
            train_images.push(namespace_image(image, &input.name));
        }
        let test_images: Vec<ImageAnnotation> = test_part
            .images
            .into_iter()
            .map(|im| namespace_image(im, &input.name))
            .collect();
        per_dataset.push(DatasetContribution {
            name: input.name.clone(),
            train_images: train_images.len(),
            test_images: test_images.len(),
            train_dropped_empty: dropped,
        });
        train.images.extend(train_images);
        test.images.extend(test_images);
    }
    train.sort_images();
    test.sort_images();
    for manifest in [&train, &test] {
        let mut seen = BTreeSet::new();
        for image in &manifest.images {
            if !seen.insert(image.image_id.as_str()) {
                return Err(MergeError::DuplicateNamespacedId(image.image_id.clone()));
            }
        }
    }
    let report = MergeReport {
        train_total: train.images.len(),
        test_total: test.images.len(),
        per_dataset,
    };
    Ok(JointOutput {
        train,
        test,
        report,
    })
}

fn namespace_image(mut image: ImageAnnotation, dataset: &str) -> ImageAnnotation {
    image.image_id = format!("{dataset}/{}", image.image_id);
    image.source_dataset = dataset.to_string();
    image
}

// ---------------------------------------------------------------------------
// Plan files
// ---------------------------------------------------------------------------

/// On-disk merge plan (TOML or JSON, decided by extension).
///
/// ```toml
/// name = "joint"
///
/// [filters]
/// require_at_least_one_instance = true
///
/// [[dataset]]
/// name = "ICDAR2013"
/// policy = "keep_original"
/// train = "ic13_train.json"
/// test = "ic13_test.json"
///
/// [[dataset]]
/// name = "ArT"
/// policy = "ratio_split"
/// train_fraction = 0.8
/// manifest = "art.json"
/// ```
#[derive(Debug, Clone, Deserialize)]
pub struct PlanFile {
    #[serde(default = "default_plan_name")]
    pub name: String,
    #[serde(default)]
    pub filters: PlanFilters,
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<PlanDataset>,
}

fn default_plan_name() -> String {
    "joint".to_string()
}

#[derive(Debug, Clone, Deserialize)]
pub struct PlanFilters {
    #[serde(default = "default_true")]
    pub require_at_least_one_instance: bool,
}

impl Default for PlanFilters {
    fn default() -> Self {
        PlanFilters {
            require_at_least_one_instance: true,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct PlanDataset {
    pub name: String,
    pub policy: String,
    pub train_fraction: Option<f64>,
    pub manifest: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

pub fn parse_plan_file(text: &str, is_toml: bool) -> Result<PlanFile, MergeError> {
    if is_toml {
        toml::from_str(text).map_err(|e| MergeError::PlanSyntax(e.to_string()))
    } else {
        serde_json::from_str(text).map_err(|e| MergeError::PlanSyntax(e.to_string()))
    }
}

/// Load a plan file and every manifest it references (paths are resolved
/// relative to the plan file). `shuffle_seed` switches every ratio split to
/// seeded shuffle order.
pub fn load_plan(path: &Path, shuffle_seed: Option<u64>) -> Result<MergePlan, MergeError> {
    let text = std::fs::read_to_string(path)?;
    let is_toml = path.extension().is_none_or(|e| e != "json");
    let file = parse_plan_file(&text, is_toml)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let order = match shuffle_seed {
        Some(seed) => SplitOrder::Shuffled { seed },
        None => SplitOrder::ById,
    };

    let mut inputs = Vec::new();
    for ds in file.datasets {
        let policy = match ds.policy.as_str() {
            "keep_original" => SplitPolicy::KeepOriginal,
            "ratio_split" => SplitPolicy::RatioSplit {
                train_fraction: require_fraction(&ds)?,
                order,
            },
            "english_only_then_ratio" => SplitPolicy::EnglishOnlyThenRatio {
                train_fraction: require_fraction(&ds)?,
                order,
            },
            other => {
                return Err(MergeError::BadPlanEntry {
                    name: ds.name.clone(),
                    message: format!("unknown policy {other:?}"),
                })
            }
        };
        let source = match policy {
            SplitPolicy::KeepOriginal => {
                let train_path = ds.train.as_ref().ok_or_else(|| MergeError::BadPlanEntry {
                    name: ds.name.clone(),
                    message: "keep_original needs train and test paths".to_string(),
                })?;
                let test_path = ds.test.as_ref().ok_or_else(|| MergeError::BadPlanEntry {
                    name: ds.name.clone(),
                    message: "keep_original needs train and test paths".to_string(),
                })?;
                let mut train = load_manifest(&base.join(train_path))?;
                train.split = Split::Train;
                let mut test = load_manifest(&base.join(test_path))?;
                test.split = Split::Test;
                DatasetSource::Pair { train, test }
            }
            _ => {
                let manifest_path =
                    ds.manifest
                        .as_ref()
                        .ok_or_else(|| MergeError::BadPlanEntry {
                            name: ds.name.clone(),
                            message: "ratio policies need a manifest path".to_string(),
                        })?;
                DatasetSource::Single(load_manifest(&base.join(manifest_path))?)
            }
        };
        inputs.push(MergeInput {
            name: ds.name,
            policy,
            source,
        });
    }
    Ok(MergePlan {
        name: file.name,
        inputs,
        require_at_least_one_instance: file.filters.require_at_least_one_instance,
    })
}

fn require_fraction(ds: &PlanDataset) -> Result<f64, MergeError> {
    let f = ds.train_fraction.ok_or_else(|| MergeError::BadPlanEntry {
        name: ds.name.clone(),
        message: "missing train_fraction".to_string(),
    })?;
    if !(f > 0.0 && f < 1.0) {
        return Err(MergeError::BadPlanEntry {
            name: ds.name.clone(),
            message: format!("train_fraction {f} outside (0, 1)"),
        });
    }
    Ok(f)
}

fn load_manifest(path: &Path) -> Result<DatasetManifest, MergeError> {
    let bytes = std::fs::read(path).map_err(|e| MergeError::ManifestLoad {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let (manifest, _) = crate::formats::parse_canonical(&bytes, crate::formats::ParseMode::Strict)
        .map_err(|e| MergeError::ManifestLoad {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    Ok(manifest)
}
