//! Property suite for the balanced reconstruction loss kernel.

use lttext::loss::{
    balanced_reconstruction_loss, binarize_mask, loss_decomposition, GuidanceMap, ImageTensor,
    LossConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_inputs(seed: u64) -> (ImageTensor, ImageTensor, GuidanceMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = rng.gen_range(1..6);
    let w = rng.gen_range(1..6);
    let c = rng.gen_range(1..4);
    let image = ImageTensor::new(
        h,
        w,
        c,
        (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let recon = ImageTensor::new(
        h,
        w,
        c,
        (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let guidance =
        GuidanceMap::new(h, w, (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    (image, recon, guidance)
}

proptest! {
    #[test]
    fn loss_is_non_negative(seed in any::<u64>(), alpha in 0.0..=1.0f64, threshold in 0.0..1.0f64) {
        let (image, recon, guidance) = random_inputs(seed);
        let cfg = LossConfig::new(alpha, threshold).unwrap();
        prop_assert!(balanced_reconstruction_loss(&image, &recon, &guidance, &cfg).unwrap() >= 0.0);
    }

    #[test]
    fn decomposition_adds_up(seed in any::<u64>(), alpha in 0.0..=1.0f64, threshold in 0.0..1.0f64) {
        let (image, recon, guidance) = random_inputs(seed);
        let cfg = LossConfig::new(alpha, threshold).unwrap();
        let total = balanced_reconstruction_loss(&image, &recon, &guidance, &cfg).unwrap();
        let (text, background) = loss_decomposition(&image, &recon, &guidance, &cfg).unwrap();
        prop_assert!(((text + background) - total).abs() <= 1e-9 * total.abs().max(1.0));
    }

    #[test]
    fn every_pixel_lands_in_exactly_one_branch(seed in any::<u64>(), threshold in -0.5..1.5f64) {
        let (_, _, guidance) = random_inputs(seed);
        let text_mask = binarize_mask(&guidance, threshold);
        // The complementary background mask is everything the text mask is
        // not; 1_{> T} + 1_{<= T} = 1 at each cell.
        for &bit in &text_mask {
            prop_assert!(bit == 0 || bit == 1);
        }
    }

    #[test]
    fn loss_is_affine_in_alpha(seed in any::<u64>(), threshold in 0.0..1.0f64) {
        // loss(alpha) = alpha * (A - B) + B where A and B are the
        // unweighted text and background error sums; checked at 0, 1/2, 1.
        let (image, recon, guidance) = random_inputs(seed);
        let at = |alpha: f64| {
            balanced_reconstruction_loss(&image, &recon, &guidance, &LossConfig::new(alpha, threshold).unwrap())
                .unwrap()
        };
        let b = at(0.0);
        let a = at(1.0);
        let mid = at(0.5);
        let expected = 0.5 * (a - b) + b;
        prop_assert!((mid - expected).abs() <= 1e-9 * expected.abs().max(1.0), "mid {mid}, expected {expected}");
    }

    #[test]
    fn zero_loss_implies_identical_images(seed in any::<u64>(), alpha in 0.01..0.99f64) {
        let (image, _, guidance) = random_inputs(seed);
        let cfg = LossConfig::new(alpha, 0.5).unwrap();
        let loss = balanced_reconstruction_loss(&image, &image, &guidance, &cfg).unwrap();
        prop_assert_eq!(loss, 0.0);
        // And perturbing one value makes it strictly positive.
        let mut perturbed = image.clone();
        perturbed.set(0, 0, 0, perturbed.get(0, 0, 0) + 0.25);
        let loss = balanced_reconstruction_loss(&image, &perturbed, &guidance, &cfg).unwrap();
        prop_assert!(loss > 0.0);
    }
}

#[test]
fn finite_difference_gradient_check() {
    // Analytic gradient wrt the reconstruction at one value is
    // 2 * w * (recon - image), w = alpha or 1 - alpha by branch.
    let (image, mut recon, guidance) = random_inputs(99);
    let cfg = LossConfig::new(0.9, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let step = 1e-6;
    for _ in 0..5 {
        let row = rng.gen_range(0..image.height());
        let col = rng.gen_range(0..image.width());
        let ch = rng.gen_range(0..image.channels());
        let weight = if guidance.get(row, col) > cfg.threshold {
            cfg.alpha
        } else {
            1.0 - cfg.alpha
        };
        let analytic = 2.0 * weight * (recon.get(row, col, ch) - image.get(row, col, ch));

        let original = recon.get(row, col, ch);
        recon.set(row, col, ch, original + step);
        let plus = balanced_reconstruction_loss(&image, &recon, &guidance, &cfg).unwrap();
        recon.set(row, col, ch, original - step);
        let minus = balanced_reconstruction_loss(&image, &recon, &guidance, &cfg).unwrap();
        recon.set(row, col, ch, original);
        let numeric = (plus - minus) / (2.0 * step);

        let denom = analytic.abs().max(1e-3);
        assert!(
            (numeric - analytic).abs() / denom <= 1e-5,
            "gradient mismatch at ({row},{col},{ch}): numeric {numeric}, analytic {analytic}"
        );
    }
}
