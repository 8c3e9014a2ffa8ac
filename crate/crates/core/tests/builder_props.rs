//! Property suite for benchmark construction: filter/evaluation consistency,
//! cleaning monotonicity, and dedup determinism.

mod common;

use std::collections::BTreeMap;

use common::star_polygon;
use lttext::builder::{
    dedup_hashes, enforce_word_level, filter_undetected, strip_non_latin, DedupConfig, FilterConfig,
};
use lttext::eval::{evaluate, EvalConfig};
use lttext::model::{
    DatasetManifest, DetectionSet, ImageAnnotation, ScoredPolygon, Split, TextInstance,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_manifest(seed: u64) -> (DatasetManifest, DetectionSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = DatasetManifest::new("prop", Split::Unsplit);
    let mut det = DetectionSet::new("det");
    for i in 0..rng.gen_range(1..6) {
        let id = format!("img{i:02}");
        let mut instances = Vec::new();
        let mut preds = Vec::new();
        for k in 0..rng.gen_range(0..5usize) {
            let center = (40.0 + 90.0 * k as f64, 50.0 + 10.0 * (i as f64));
            let poly = star_polygon(&mut rng, center, (4, 8), 18.0);
            let care = rng.gen_bool(0.8);
            let mut inst = TextInstance::new(poly.clone(), care, Some(format!("w{k}")));
            if rng.gen_bool(0.3) {
                inst.transcription = Some("two words".to_string());
            }
            instances.push(inst);
            // A detector that finds some instances exactly, misses others.
            if rng.gen_bool(0.6) {
                preds.push(ScoredPolygon {
                    polygon: poly,
                    score: None,
                });
            }
            if rng.gen_bool(0.2) {
                let stray = star_polygon(&mut rng, (400.0, 400.0), (4, 6), 10.0);
                preds.push(ScoredPolygon {
                    polygon: stray,
                    score: None,
                });
            }
        }
        manifest.images.push(ImageAnnotation {
            image_id: id.clone(),
            file_name: format!("{id}.jpg"),
            width: 600,
            height: 600,
            source_dataset: "prop".to_string(),
            instances,
        });
        det.per_image.insert(id, preds);
    }
    (manifest, det)
}

fn care_count(m: &DatasetManifest) -> usize {
    m.images
        .iter()
        .flat_map(|im| &im.instances)
        .filter(|i| i.care)
        .count()
}

proptest! {
    #[test]
    fn full_recall_means_empty_filter_output(seed in any::<u64>()) {
        // A detector set that predicts every care polygon exactly has
        // recall 1.0, so nothing is left undetected at the same threshold.
        let (manifest, _) = random_manifest(seed);
        let mut perfect = DetectionSet::new("perfect");
        for image in &manifest.images {
            perfect.per_image.insert(
                image.image_id.clone(),
                image
                    .instances
                    .iter()
                    .filter(|i| i.care)
                    .map(|i| ScoredPolygon { polygon: i.polygon.clone(), score: None })
                    .collect(),
            );
        }
        let out = evaluate(&manifest, &perfect, &EvalConfig::default());
        prop_assume!(care_count(&manifest) > 0);
        prop_assert_eq!(out.report.recall, 1.0);
        let filtered = filter_undetected(&[perfect], &manifest, &FilterConfig::default());
        prop_assert!(filtered.images_with_undetected.is_empty());
    }

    #[test]
    fn filter_agrees_with_plain_max_iou(seed in any::<u64>()) {
        let (manifest, det) = random_manifest(seed);
        let cfg = FilterConfig::default();
        let out = filter_undetected(std::slice::from_ref(&det), &manifest, &cfg);
        for image in &manifest.images {
            let joint: Vec<_> = det.polygons_for(&image.image_id);
            let reported = out.undetected.get(&image.image_id);
            for inst in image.instances.iter().filter(|i| i.care) {
                let best = joint
                    .iter()
                    .map(|p| lttext::geometry::iou(&inst.polygon, p))
                    .fold(0.0f64, f64::max);
                let listed = reported.is_some_and(|list| list.contains(inst));
                prop_assert_eq!(listed, best < cfg.iou_threshold);
            }
        }
    }

    #[test]
    fn cleaning_never_raises_care_count(seed in any::<u64>()) {
        let (manifest, _) = random_manifest(seed);
        let before = care_count(&manifest);
        let (stripped, _) = strip_non_latin(&manifest);
        prop_assert!(care_count(&stripped) <= before);
        let (word_level, _) = enforce_word_level(&stripped);
        prop_assert!(care_count(&word_level) <= care_count(&stripped));
    }

    #[test]
    fn dedup_is_permutation_invariant(hashes in proptest::collection::vec(any::<u64>(), 1..40)) {
        // Same hash set under two different id insertions: the pair list and
        // survivor set depend only on the (id, hash) mapping.
        let forward: BTreeMap<String, u64> = hashes
            .iter()
            .enumerate()
            .map(|(i, &h)| (format!("id{i:03}"), h))
            .collect();
        let reversed: BTreeMap<String, u64> = hashes
            .iter()
            .enumerate()
            .rev()
            .map(|(i, &h)| (format!("id{i:03}"), h))
            .collect();
        let cfg = DedupConfig::default();
        let a = dedup_hashes(&forward, &cfg).unwrap();
        let b = dedup_hashes(&reversed, &cfg).unwrap();
        prop_assert_eq!(a.pairs, b.pairs);
        prop_assert_eq!(a.survivors, b.survivors);
    }

    #[test]
    fn duplicate_relation_is_symmetric(a in any::<u64>(), b in any::<u64>()) {
        use lttext::builder::hash_similarity;
        prop_assert_eq!(hash_similarity(a, b), hash_similarity(b, a));
    }
}
