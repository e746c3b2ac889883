use omrkit_core::align::{
    estimate_transform, estimate_transform_traced, transfer_annotations, warp_image, RigidTransform, SearchRange,
};
use omrkit_core::annotation::Page;
use omrkit_core::image::GrayImage;
use omrkit_core::synth::{degrade_image, generate_page, DegradeParams, PageSpec};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn page(seed: u64) -> (Page, GrayImage) {
    let spec = PageSpec {
        width: 320,
        height: 240,
        num_staves: 2,
        symbols_per_staff: 5,
        top_margin: 20,
        ..PageSpec::default()
    };
    generate_page(&spec, "p", &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn assert_close(got: &RigidTransform, want: &RigidTransform) {
    assert!((got.theta - want.theta).abs() <= 0.1, "{got:?} vs {want:?}");
    assert!((got.tx - want.tx).abs() <= 1.0, "{got:?} vs {want:?}");
    assert!((got.ty - want.ty).abs() <= 1.0, "{got:?} vs {want:?}");
}

#[test]
fn identity_scan() {
    let (_, img) = page(1);
    let a = estimate_transform(&img, &img, SearchRange::default()).unwrap();
    assert_eq!(a.transform, RigidTransform::IDENTITY);
    assert!((a.ncc - 1.0).abs() < 1e-9);
}

#[test]
fn recovers_clean_and_noisy_warps() {
    let (_, img) = page(2);
    let t = RigidTransform::new(2.0, 5.0, -3.0);
    let clean = warp_image(&img, &t);
    let a = estimate_transform(&img, &clean, SearchRange::default()).unwrap();
    assert_close(&a.transform, &t);

    let params = DegradeParams {
        transform: t,
        noise_sigma: 10.0,
        ..DegradeParams::default()
    };
    let noisy = degrade_image(&img, &params, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let b = estimate_transform(&img, &noisy, SearchRange::default()).unwrap();
    assert_close(&b.transform, &t);
    assert!(b.ncc < 1.0);
}

#[test]
fn recovery_across_the_stated_range() {
    let (_, img) = page(3);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..6 {
        let t = RigidTransform::new(
            rng.random_range(-8.0..=8.0),
            rng.random_range(-30.0..=30.0),
            rng.random_range(-30.0..=30.0),
        );
        let scan = warp_image(&img, &t);
        let a = estimate_transform(&img, &scan, SearchRange::default()).unwrap();
        assert_close(&a.transform, &t);
    }
}

#[test]
fn off_grid_shifts_are_resolved_below_a_pixel() {
    let (_, img) = page(4);
    for t in [
        RigidTransform::new(0.83, 6.5, -3.5),
        RigidTransform::new(-2.02, -11.3, 7.7),
    ] {
        let scan = warp_image(&img, &t);
        let a = estimate_transform(&img, &scan, SearchRange::default())
            .unwrap()
            .transform;
        assert!(
            (a.tx - t.tx).abs() < 0.25 && (a.ty - t.ty).abs() < 0.25,
            "{a:?} vs {t:?}"
        );
        assert!((a.theta - t.theta).abs() < 0.05, "{a:?} vs {t:?}");
    }
}

#[test]
fn returned_score_dominates_the_trace() {
    let (_, img) = page(5);
    let scan = warp_image(&img, &RigidTransform::new(-1.3, 7.0, 2.0));
    let (a, trace) = estimate_transform_traced(&img, &scan, SearchRange::default()).unwrap();
    assert!(!trace.full_resolution.is_empty());
    for (t, s) in &trace.full_resolution {
        assert!(a.ncc >= *s, "{t:?} scored {s} > {}", a.ncc);
    }
}

fn mean_abs_interior_diff(a: &GrayImage, b: &GrayImage, border: usize) -> f64 {
    let (w, h) = (a.width(), a.height());
    let mut sum = 0f64;
    let mut n = 0f64;
    for y in border..h - border {
        for x in border..w - border {
            sum += (a.get(x, y) as f64 - b.get(x, y) as f64).abs();
            n += 1.0;
        }
    }
    sum / n
}

#[test]
fn warp_round_trip_loses_little() {
    // scan-like input: raw one-pixel line art loses about 10 grey levels
    // under two bilinear resamplings; after a print blur the loss is ~1
    let (_, raw) = page(6);
    let blurred = DegradeParams {
        blur_sigma: 1.5,
        ..DegradeParams::default()
    };
    let img = degrade_image(&raw, &blurred, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let t = RigidTransform::new(3.0, 4.5, -2.25);
    let back = warp_image(&warp_image(&img, &t), &t.inverse());
    let mad = mean_abs_interior_diff(&img, &back, 40);
    assert!(mad < 2.0, "mean abs diff {mad}");
}

#[test]
fn inverse_composes_to_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let t = RigidTransform::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
        );
        for c in [t.then(&t.inverse()), t.inverse().then(&t)] {
            assert!(c.theta.abs() < 1e-9);
            assert!(c.tx.abs() < 1e-6 && c.ty.abs() < 1e-6, "{c:?}");
        }
    }
}

#[test]
fn translation_transfer_composes_exactly() {
    let (p, _) = page(7);
    let t1 = RigidTransform::translation(4.0, -2.0);
    let t2 = RigidTransform::translation(-1.0, 6.0);
    let twice = transfer_annotations(&transfer_annotations(&p, &t1), &t2);
    let once = transfer_annotations(&p, &t1.then(&t2));
    assert_eq!(twice, once);
}

#[test]
fn rotation_transfer_composes_within_envelope_slack() {
    let (p, _) = page(8);
    let t1 = RigidTransform::new(2.0, 3.0, 1.0);
    let t2 = RigidTransform::new(-1.0, -2.0, 4.0);
    let twice = transfer_annotations(&transfer_annotations(&p, &t1), &t2);
    let once = transfer_annotations(&p, &t1.then(&t2));
    let env = |w: f64, h: f64, theta: f64| {
        let (s, c) = theta.to_radians().sin_cos();
        (w * c.abs() + h * s.abs(), w * s.abs() + h * c.abs())
    };
    for ((a, b), orig) in twice.annotations.iter().zip(&once.annotations).zip(&p.annotations) {
        // the two-step envelope contains the direct one
        assert!(a.bbox.intersection_area(&b.bbox) >= b.bbox.area() - 1e-6);
        // and is no larger than the envelope of the first envelope
        let (w1, h1) = env(orig.bbox.width(), orig.bbox.height(), t1.theta);
        let (w2, h2) = env(w1, h1, t2.theta);
        assert!(a.bbox.width() <= w2 + 1e-6 && a.bbox.height() <= h2 + 1e-6);
        assert_eq!(a.label, b.label);
    }
}

#[test]
fn size_mismatch_is_rejected() {
    let (_, img) = page(9);
    let small = GrayImage::filled(10, 10, 0);
    assert!(estimate_transform(&img, &small, SearchRange::default()).is_err());
    let flat = GrayImage::filled(img.width(), img.height(), 255);
    assert!(estimate_transform(&flat, &img, SearchRange::default()).is_err());
}
