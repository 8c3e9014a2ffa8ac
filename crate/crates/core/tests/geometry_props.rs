//! Property suite for the polygon arithmetic.

mod common;

use common::polygon_pair;
use lttext::geometry::{intersection_area, iou, rasterized_iou_oracle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn iou_symmetric_and_in_range(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = polygon_pair(&mut rng);
        let ab = iou(&a, &b);
        let ba = iou(&b, &a);
        prop_assert!((ab - ba).abs() <= 1e-9, "asymmetry: {ab} vs {ba}");
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&ab), "out of range: {ab}");
    }

    #[test]
    fn iou_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, _) = polygon_pair(&mut rng);
        prop_assert!(iou(&a, &a) >= 1.0 - 1e-9);
    }

    #[test]
    fn iou_translation_invariant(seed in any::<u64>(), dx in -500.0..500.0f64, dy in -500.0..500.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = polygon_pair(&mut rng);
        let before = iou(&a, &b);
        let after = iou(&a.translated(dx, dy), &b.translated(dx, dy));
        prop_assert!((before - after).abs() <= 1e-9, "{before} vs {after}");
    }

    #[test]
    fn iou_scale_invariant(seed in any::<u64>(), s in 0.1..20.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = polygon_pair(&mut rng);
        let before = iou(&a, &b);
        let after = iou(&a.scaled(s).unwrap(), &b.scaled(s).unwrap());
        prop_assert!((before - after).abs() <= 1e-7, "{before} vs {after} at scale {s}");
    }

    #[test]
    fn intersection_bounded_by_smaller_area(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = polygon_pair(&mut rng);
        let inter = intersection_area(&a, &b);
        let bound = a.area().min(b.area());
        prop_assert!(inter <= bound * (1.0 + 1e-9) + 1e-9, "inter {inter} > min area {bound}");
        prop_assert!(inter >= 0.0);
    }

    #[test]
    fn clipping_agrees_with_rasterization(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = polygon_pair(&mut rng);
        let exact = iou(&a, &b);
        let estimate = rasterized_iou_oracle(&a, &b, 256);
        prop_assert!((exact - estimate).abs() <= 0.02, "exact {exact}, oracle {estimate}");
    }
}

#[test]
fn oracle_resolution_sharpens_agreement() {
    // The oracle must converge toward the clipped value as the grid
    // refines; checked on a fixed concave pair.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (a, b) = polygon_pair(&mut rng);
    let exact = iou(&a, &b);
    let coarse = (exact - rasterized_iou_oracle(&a, &b, 64)).abs();
    let fine = (exact - rasterized_iou_oracle(&a, &b, 1024)).abs();
    assert!(
        fine <= coarse + 1e-3,
        "coarse err {coarse}, fine err {fine}"
    );
    assert!(fine <= 0.01, "fine err {fine}");
}
