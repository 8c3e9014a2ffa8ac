//! Long-tailed benchmark construction: detector-assisted filtering of
//! undetected instances plus the cleaning passes applied before release.
//!
//! Cleaning never deletes an instance. Removed text is demoted to a
//! don't-care region so its area still suppresses spurious detections
//! during evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{iou, Polygon};
use crate::model::{
    is_latin_transcription, DatasetManifest, DetectionSet, Diagnostic, Script, TextInstance,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("cannot decode image {path}: {message}")]
    UndecodableImage { path: String, message: String },
    #[error("similarity threshold {0} out of range (0, 1]")]
    BadThreshold(f64),
}

/// Configuration for the undetected-instance filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub iou_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { iou_threshold: 0.5 }
    }
}

/// Instances no detector found, grouped by image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterOutput {
    /// Images containing at least one undetected care instance, sorted.
    pub images_with_undetected: Vec<String>,
    pub undetected: BTreeMap<String, Vec<TextInstance>>,
}

impl FilterOutput {
    pub fn total_instances(&self) -> usize {
        self.undetected.values().map(Vec::len).sum()
    }
}

/// Union of all detectors' polygons for one image; no merging or
/// non-maximum suppression is applied.
pub fn joint_predict(detections: &[DetectionSet], image_id: &str) -> Vec<Polygon> {
    detections
        .iter()
        .flat_map(|set| set.polygons_for(image_id))
        .collect()
}

/// Keep every care instance whose best IoU against the joint predictions is
/// below the threshold; report only images that retain at least one.
pub fn filter_undetected(
    detections: &[DetectionSet],
    manifest: &DatasetManifest,
    cfg: &FilterConfig,
) -> FilterOutput {
    let retained: Vec<(String, Vec<TextInstance>)> = manifest
        .images
        .par_iter()
        .filter_map(|image| {
            let joint = joint_predict(detections, &image.image_id);
            let missed: Vec<TextInstance> = image
                .instances
                .iter()
                .filter(|inst| inst.care)
                .filter(|inst| {
                    let best = joint
                        .iter()
                        .map(|pred| iou(&inst.polygon, pred))
                        .fold(0.0f64, f64::max);
                    best < cfg.iou_threshold
                })
                .cloned()
                .collect();
            (!missed.is_empty()).then(|| (image.image_id.clone(), missed))
        })
        .collect();

    let mut undetected: BTreeMap<String, Vec<TextInstance>> = BTreeMap::new();
    for (id, missed) in retained {
        undetected.insert(id, missed);
    }
    FilterOutput {
        images_with_undetected: undetected.keys().cloned().collect(),
        undetected,
    }
}

/// Render a filter result as a manifest: retained instances stay care, every
/// other instance of a retained image is demoted, and images with nothing
/// retained are dropped.
pub fn filter_output_to_manifest(
    manifest: &DatasetManifest,
    output: &FilterOutput,
) -> DatasetManifest {
    let mut out = DatasetManifest::new(manifest.name.clone(), manifest.split);
    for image in &manifest.images {
        let Some(retained) = output.undetected.get(&image.image_id) else {
            continue;
        };
        let mut image = image.clone();
        for inst in &mut image.instances {
            inst.care = retained.contains(inst);
        }
        out.images.push(image);
    }
    out.sort_images();
    out
}

/// Outcome of one cleaning pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CleanReport {
    pub demoted: usize,
    pub kept: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Demote instances containing text outside the Latin script.
///
/// Declared script metadata wins: `non_latin` and `mixed` are demoted,
/// `latin` is kept. Without metadata the transcription is checked against
/// the conservative alphabet of [`is_latin_transcription`]; instances with
/// neither metadata nor transcription are kept with a warning.
pub fn strip_non_latin(manifest: &DatasetManifest) -> (DatasetManifest, CleanReport) {
    clean_instances(manifest, |inst, diags| {
        if !inst.care {
            return true;
        }
        match inst.script {
            Script::NonLatin | Script::Mixed => false,
            Script::Latin => true,
            Script::Unknown => match inst.transcription.as_deref() {
                Some(text) => is_latin_transcription(text),
                None => {
                    diags.push(Diagnostic::warning(
                        "no script metadata or transcription; instance kept",
                        "strip_non_latin",
                    ));
                    true
                }
            },
        }
    })
}

/// Demote instances that are not word-level annotations: transcriptions
/// with internal spaces or instances flagged `word_level = false`.
pub fn enforce_word_level(manifest: &DatasetManifest) -> (DatasetManifest, CleanReport) {
    clean_instances(manifest, |inst, _| {
        if !inst.care {
            return true;
        }
        if !inst.word_level {
            return false;
        }
        match inst.transcription.as_deref() {
            Some(text) => !text.trim().contains(' '),
            None => true,
        }
    })
}

fn clean_instances<F>(manifest: &DatasetManifest, mut keep: F) -> (DatasetManifest, CleanReport)
where
    F: FnMut(&TextInstance, &mut Vec<Diagnostic>) -> bool,
{
    let mut out = manifest.clone();
    let mut report = CleanReport::default();
    for image in &mut out.images {
        for inst in &mut image.instances {
            if keep(inst, &mut report.diagnostics) {
                report.kept += 1;
            } else {
                inst.care = false;
                report.demoted += 1;
            }
        }
    }
    (out, report)
}

// ---------------------------------------------------------------------------
// Near-duplicate image removal
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HashKind {
    #[default]
    DifferenceHash64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DedupConfig {
    /// Pairs with similarity strictly above this are duplicates.
    pub similarity_threshold: f64,
    pub hash_kind: HashKind,
    /// Compare every pair instead of using hash-byte blocking.
    pub exact: bool,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            similarity_threshold: 0.95,
            hash_kind: HashKind::DifferenceHash64,
            exact: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuplicatePair {
    pub id_a: String,
    pub id_b: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DedupOutput {
    /// Verified duplicate pairs with id_a < id_b, sorted.
    pub pairs: Vec<DuplicatePair>,
    /// One survivor per duplicate component (the lexicographically smallest
    /// id) plus every unduplicated image, sorted.
    pub survivors: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

/// 64-bit difference hash: the image is shrunk to a 9x8 grayscale grid and
/// each bit records whether brightness increases left to right.
pub fn dhash64(image: &image::DynamicImage) -> u64 {
    let small = image::imageops::resize(
        &image.to_luma8(),
        9,
        8,
        image::imageops::FilterType::Triangle,
    );
    let mut hash = 0u64;
    let mut bit = 0;
    for y in 0..8 {
        for x in 0..8 {
            if small.get_pixel(x + 1, y).0[0] > small.get_pixel(x, y).0[0] {
                hash |= 1 << bit;
            }
            bit += 1;
        }
    }
    hash
}

pub fn hash_image_file(path: &Path) -> Result<u64, BuildError> {
    let img = image::open(path).map_err(|e| BuildError::UndecodableImage {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(dhash64(&img))
}

/// similarity(a, b) = 1 - hamming(a, b) / 64.
pub fn hash_similarity(a: u64, b: u64) -> f64 {
    1.0 - (a ^ b).count_ones() as f64 / 64.0
}

/// Cluster near-duplicate images from precomputed 64-bit hashes.
///
/// Candidate pairs come from blocking on each of the 8 hash bytes: two
/// hashes within the Hamming radius differ in at most that many bytes, so
/// they must collide in at least one block. When the radius implied by the
/// threshold exceeds 7 bits the blocking guarantee breaks down and the
/// comparison silently falls back to exhaustive pairing.
pub fn dedup_hashes(
    hashes: &BTreeMap<String, u64>,
    cfg: &DedupConfig,
) -> Result<DedupOutput, BuildError> {
    if !(cfg.similarity_threshold > 0.0 && cfg.similarity_threshold <= 1.0) {
        return Err(BuildError::BadThreshold(cfg.similarity_threshold));
    }
    let ids: Vec<&String> = hashes.keys().collect();
    let values: Vec<u64> = hashes.values().copied().collect();
    let n = ids.len();
    // Largest Hamming distance d with 1 - d/64 strictly above the threshold.
    let max_dist = ((64.0 * (1.0 - cfg.similarity_threshold)).ceil() as u32).saturating_sub(1);

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    if cfg.exact || max_dist > 7 {
        for i in 0..n {
            for j in (i + 1)..n {
                candidates.push((i, j));
            }
        }
    } else {
        let mut blocks: BTreeMap<(u8, u8), Vec<usize>> = BTreeMap::new();
        for (idx, &hash) in values.iter().enumerate() {
            for byte in 0..8u8 {
                let key = (byte, (hash >> (byte * 8)) as u8);
                blocks.entry(key).or_default().push(idx);
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for bucket in blocks.values() {
            for (k, &i) in bucket.iter().enumerate() {
                for &j in &bucket[k + 1..] {
                    if seen.insert((i.min(j), i.max(j))) {
                        candidates.push((i.min(j), i.max(j)));
                    }
                }
            }
        }
    }

    // Union-find over verified duplicate pairs.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }

    let mut pairs = Vec::new();
    for (i, j) in candidates {
        let dist = (values[i] ^ values[j]).count_ones();
        if dist <= max_dist {
            let (a, b) = if ids[i] <= ids[j] { (i, j) } else { (j, i) };
            pairs.push(DuplicatePair {
                id_a: ids[a].clone(),
                id_b: ids[b].clone(),
                similarity: hash_similarity(values[i], values[j]),
            });
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    pairs.sort_by(|a, b| (&a.id_a, &a.id_b).cmp(&(&b.id_a, &b.id_b)));

    // Lexicographically smallest id per component survives. Ids are sorted
    // (BTreeMap order), so the smallest index is the smallest id.
    let mut survivors: Vec<String> = (0..n)
        .filter(|&i| find(&mut parent, i) == i)
        .map(|i| ids[i].clone())
        .collect();
    survivors.sort();
    Ok(DedupOutput {
        pairs,
        survivors,
        diagnostics: Vec::new(),
    })
}

/// Hash and cluster a directory-less list of image files; undecodable files
/// are skipped with a diagnostic.
pub fn dedup_images(
    files: &[(String, std::path::PathBuf)],
    cfg: &DedupConfig,
) -> Result<DedupOutput, BuildError> {
    let results: Vec<(String, Result<u64, BuildError>)> = files
        .par_iter()
        .map(|(id, path)| (id.clone(), hash_image_file(path)))
        .collect();
    let mut hashes = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (id, result) in results {
        match result {
            Ok(hash) => {
                hashes.insert(id, hash);
            }
            Err(e) => diagnostics.push(Diagnostic::warning(e.to_string(), id)),
        }
    }
    let mut out = dedup_hashes(&hashes, cfg)?;
    out.diagnostics = diagnostics;
    Ok(out)
}
