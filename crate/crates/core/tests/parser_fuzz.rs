//! Fuzz safety: arbitrary or mutated bytes must never panic a parser; every
//! failure has to surface as a structured error.

use lttext::formats::{
    parse_canonical, parse_detection_txt, parse_detections_json, parse_gap_cells, parse_icdar_gt,
    parse_total_text, write_canonical, ParseMode,
};
use lttext::geometry::Polygon;
use lttext::model::{
    ChallengeCategory, DatasetManifest, ImageAnnotation, Script, Split, TextInstance,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeds() -> Vec<Vec<u8>> {
    vec![
        br#"{"schema_version":"1.0","dataset":{"name":"d","split":"train","images":[{"image_id":"a","file_name":"a.jpg","width":100,"height":50,"source_dataset":"s","instances":[{"polygon":[[0,0],[10,0],[10,5],[0,5]],"care":true,"transcription":"hi","categories":["blurred"],"word_level":true,"script":"latin"}]}]}}"#.to_vec(),
        br#"{"schema_version":"1.0","detector":"d","results":[{"image_id":"a","polygons":[[[0,0],[9,0],[9,4],[0,4]]],"scores":[0.5]}]}"#.to_vec(),
        b"377,117,463,117,465,130,378,130,Genaxis Theatre\n374,155,409,155,409,170,374,170,###\n".to_vec(),
        b"x: [[115 503 494 115]], y: [[322 346 426 404]], ornt: [u'c'], transcriptions: [u'nike']\n".to_vec(),
        b"train,test,f_measure\nTT,TT,89.0\n".to_vec(),
    ]
}

fn parse_everything(bytes: &[u8]) {
    for mode in [ParseMode::Strict, ParseMode::Lenient] {
        let _ = parse_canonical(bytes, mode);
        let _ = parse_detections_json(bytes, mode);
        let _ = parse_icdar_gt(bytes, mode);
        let _ = parse_detection_txt(bytes, mode);
        let _ = parse_total_text(bytes, mode);
    }
    let _ = parse_gap_cells(bytes);
}

proptest! {
    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        parse_everything(&bytes);
    }

    #[test]
    fn mutated_seed_documents_never_panic(
        seed_idx in 0usize..5,
        mutations in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..12)
    ) {
        let mut bytes = seeds()[seed_idx].clone();
        for (pos, byte) in mutations {
            let len = bytes.len();
            bytes[pos % len] = byte;
        }
        parse_everything(&bytes);
    }

    #[test]
    fn truncated_seed_documents_never_panic(seed_idx in 0usize..5, cut in any::<usize>()) {
        let bytes = seeds()[seed_idx].clone();
        let cut = cut % (bytes.len() + 1);
        parse_everything(&bytes[..cut]);
    }

    #[test]
    fn canonical_round_trip_preserves_manifests(seed in any::<u64>()) {
        let manifest = random_manifest(seed);
        let bytes = write_canonical(&manifest);
        let (parsed, diags) = parse_canonical(bytes.as_bytes(), ParseMode::Strict).unwrap();
        prop_assert!(diags.is_empty());
        prop_assert_eq!(&parsed, &manifest);
        // Canonical output is a fixed point of write(parse(..)).
        prop_assert_eq!(write_canonical(&parsed), bytes);
    }
}

/// Random manifest with awkward but valid content: float vertices,
/// punctuation-heavy transcriptions, every category and script value.
fn random_manifest(seed: u64) -> DatasetManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = DatasetManifest::new(
        format!("ds-{}", rng.gen_range(0..100)),
        [Split::Train, Split::Test, Split::Unsplit][rng.gen_range(0..3)],
    );
    for i in 0..rng.gen_range(0..5usize) {
        let mut instances = Vec::new();
        for k in 0..rng.gen_range(0..4usize) {
            let x = rng.gen_range(0.0..500.0);
            let y = rng.gen_range(0.0..500.0);
            let w = rng.gen_range(1.0..80.0);
            let h = rng.gen_range(1.0..60.0);
            let polygon = Polygon::rect(x, y, x + w, y + h).unwrap();
            let transcription = match rng.gen_range(0..4) {
                0 => None,
                1 => Some("plain".to_string()),
                2 => Some("with,commas,and spaces!?".to_string()),
                _ => Some(format!("w{k}\u{00e9}")),
            };
            let mut inst = TextInstance::new(polygon, rng.gen_bool(0.8), transcription);
            inst.word_level = rng.gen_bool(0.9);
            inst.script = [
                Script::Latin,
                Script::NonLatin,
                Script::Mixed,
                Script::Unknown,
            ][rng.gen_range(0..4)];
            let n_cats = rng.gen_range(0..3);
            for _ in 0..n_cats {
                inst.categories
                    .insert(ChallengeCategory::ALL[rng.gen_range(0..13)]);
            }
            instances.push(inst);
        }
        manifest.images.push(ImageAnnotation {
            image_id: format!("im{i:03}"),
            file_name: format!("im{i:03}.jpg"),
            width: rng.gen_range(1..4000),
            height: rng.gen_range(1..4000),
            source_dataset: "fuzz".to_string(),
            instances,
        });
    }
    manifest
}
