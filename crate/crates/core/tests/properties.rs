use aedr::harness::{synthesize_corpus, TextureFamily};
use aedr::signal::double_reconstruct_with;
use aedr::threshold::fit_kde;
use aedr::{
    chain_reconstruct, double_reconstruct, kde_cdf, loss, solve_threshold, train_linear_backend,
    GlcmConfig, Image, Kde, LinearAeBackend, LossMetric, NoiseSigma,
};
use proptest::prelude::*;

const K: usize = 16;

fn backend() -> LinearAeBackend {
    let train = TextureFamily::new("a", 2.0, 0.5, 0.15)
        .corpus(120, 24, 24, 7)
        .unwrap();
    train_linear_backend(&train, K, NoiseSigma::default(), 1).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn in_distribution_losses_stay_level() {
    let b = backend();
    let x = synthesize_corpus(&b, 1, 3).unwrap().remove(0);
    let cfg = GlcmConfig::default();
    let (l1, l2): (Vec<f64>, Vec<f64>) = (0..200u64)
        .map(|s| {
            let r = double_reconstruct(&b, &x, LossMetric::Mse, &cfg, 2 * s).unwrap();
            (r.l1, r.l2)
        })
        .unzip();
    let ratio = mean(&l1) / mean(&l2);
    assert!((0.8..=1.25).contains(&ratio), "{ratio}");
}

#[test]
fn out_of_span_images_have_large_ratio() {
    let b = backend();
    let foreign = TextureFamily::new("b", 5.0, 0.5, 0.15)
        .corpus(20, 24, 24, 9)
        .unwrap();
    for x in &foreign {
        let r = double_reconstruct(&b, x, LossMetric::Mse, &GlcmConfig::default(), 0).unwrap();
        assert!(r.ratio > 2.0, "{}", r.ratio);
    }
}

#[test]
fn synthesized_corpus_ratio_is_near_one() {
    let b = backend();
    let corpus = synthesize_corpus(&b, 200, 4).unwrap();
    let ratios: Vec<f64> = corpus
        .iter()
        .enumerate()
        .map(|(i, x)| {
            double_reconstruct(&b, x, LossMetric::Mse, &GlcmConfig::default(), 2 * i as u64)
                .unwrap()
                .ratio
        })
        .collect();
    let m = mean(&ratios);
    assert!((0.8..=1.3).contains(&m), "{m}");
    // Both losses are scaled chi-square with K degrees of freedom, so the
    // ratio is F(K, K) with mean K / (K - 2).
    let k = K as f64;
    assert!((m - k / (k - 2.0)).abs() < 0.15, "{m}");
}

#[test]
fn ratio_is_invariant_to_loss_scale() {
    let b = backend();
    let x = TextureFamily::new("b", 5.0, 0.5, 0.15)
        .corpus(1, 24, 24, 2)
        .unwrap()
        .remove(0);
    let cfg = GlcmConfig::default();
    let base = double_reconstruct(&b, &x, LossMetric::Mse, &cfg, 5).unwrap();
    for c in [1e-3, 0.5, 7.0, 1e4] {
        let scaled = move |a: &Image, y: &Image| Ok(c * loss(LossMetric::Mse, a, y)?);
        let r = double_reconstruct_with(&b, &x, LossMetric::Mse, &scaled, &cfg, 5).unwrap();
        assert!(
            (r.ratio - base.ratio).abs() <= 1e-12 * base.ratio,
            "c = {c}"
        );
        assert!((r.l1 - c * base.l1).abs() <= 1e-12 * c * base.l1);
    }
}

#[test]
fn chain_of_two_matches_double_reconstruction() {
    let b = backend();
    let x = TextureFamily::new("b", 5.0, 0.5, 0.15)
        .corpus(1, 24, 24, 3)
        .unwrap()
        .remove(0);
    let r = double_reconstruct(&b, &x, LossMetric::Mse, &GlcmConfig::default(), 11).unwrap();
    let c = chain_reconstruct(&b, &x, 2, LossMetric::Mse, 11).unwrap();
    assert_eq!(c.single_losses, vec![r.l1, r.l2]);
    assert_eq!(c.cumulative_losses[1], r.l1 + r.l2);
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..40)
}

proptest! {
    #[test]
    fn calibration_never_raises_the_signal(l1 in 0.0f64..1.0, l2 in 1e-9f64..1.0, px in prop::collection::vec(0.0f64..=1.0, 64)) {
        let img = Image::new(8, 8, 1, px).unwrap();
        let h = aedr::glcm::image_homogeneity(&img, &GlcmConfig::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        let r = aedr::ReconstructionRecord::from_losses(LossMetric::Mse, l1, l2, h);
        prop_assert!(r.calibrated <= r.ratio);
    }

    #[test]
    fn kde_cdf_is_monotone(s in samples(), h in 0.01f64..5.0, a in -100.0f64..100.0, d in 0.0f64..50.0) {
        let lo = kde_cdf(&s, h, a);
        let hi = kde_cdf(&s, h, a + d);
        prop_assert!(lo <= hi);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }

    #[test]
    fn threshold_shifts_with_samples(s in samples(), shift in -100.0f64..100.0, alpha in 0.01f64..0.5) {
        let kde = fit_kde(&s, None).unwrap();
        let h = kde.bandwidth();
        let moved = Kde::new(s.iter().map(|v| v + shift).collect(), h).unwrap();
        let tau = solve_threshold(&kde, alpha).unwrap();
        let tau_moved = solve_threshold(&moved, alpha).unwrap();
        let tol = 1e-9 * (1.0 + shift.abs() + tau.abs()) + 1e-7 * kde.spread();
        prop_assert!((tau_moved - (tau + shift)).abs() <= tol, "{} vs {}", tau_moved, tau + shift);
    }
}
