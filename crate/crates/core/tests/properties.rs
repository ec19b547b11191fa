use forge_core::augment::{apply_augment, plan_unify, survives_unify, AugmentConfig, ImageDims};
use forge_core::geometry::{back_project, euclid_from_principal, principal_from_euclid, project};
use forge_core::image::RgbImage;
use forge_core::metrics::{delta1, per_sample_metric, Delta1Mode, MetricKind};
use forge_core::prompts::{build_answer, parse_answer, AnswerValues, PromptVariant, TemplateTable};
use forge_core::tasks::TaskKind;
use forge_core::{Intrinsics, Pixel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn intrinsics() -> impl Strategy<Value = Intrinsics> {
    (50.0..3000.0f64, 0.8..1.25f64, 0.0..2000.0f64, 0.0..1500.0f64).prop_map(|(fx, r, cx, cy)| Intrinsics::new(fx, fx * r, cx, cy).unwrap())
}

proptest! {
    #[test]
    fn project_inverts_back_project(k in intrinsics(), u in 0.0..2000.0f64, v in 0.0..1500.0f64, z in 0.01..500.0f64) {
        let p = Pixel::new(u, v);
        let q = project(back_project(p, z, &k).unwrap(), &k).unwrap();
        prop_assert!((q.u - u).abs() < 1e-6 && (q.v - v).abs() < 1e-6);
    }

    #[test]
    fn euclid_never_below_principal(k in intrinsics(), u in 0.0..2000.0f64, v in 0.0..1500.0f64, z in 0.01..500.0f64) {
        let p = Pixel::new(u, v);
        let e = euclid_from_principal(p, z, &k).unwrap();
        prop_assert!(e >= z);
        let back = principal_from_euclid(p, e, &k).unwrap();
        prop_assert!((back - z).abs() <= 1e-12 * z);
    }

    #[test]
    fn augment_preserves_the_3d_point(
        w in 24u32..160, h in 24u32..120, fx in 150.0..1500.0f64,
        fu in 0.0..1.0f64, fv in 0.0..1.0f64, z in 0.5..80.0f64, seed: u64, crop: bool,
    ) {
        let k = Intrinsics::new(fx, fx, w as f64 / 2.0, h as f64 / 2.0).unwrap();
        let image = RgbImage::new(w, h, [40, 80, 120]);
        let base = AugmentConfig::default();
        let cfg = if crop { base } else { base.for_evaluation() };
        let p = Pixel::new((fu * (w - 1) as f64).round(), (fv * (h - 1) as f64).round());
        let plan = plan_unify(ImageDims::of(&image), &k, &cfg.for_evaluation()).unwrap();
        prop_assume!(survives_unify(p, &plan));
        let a = apply_augment(&image, &k, &[p], &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let before = back_project(p, z, &k).unwrap();
        let after = back_project(a.pixels[0], z, &a.intrinsics).unwrap();
        prop_assert!(before.distance(&after) < 1e-6);
        prop_assert_eq!(a.intrinsics.fx, cfg.f_uni);
    }

    #[test]
    fn answers_round_trip(v in 0.05..300.0f64, vi in 0usize..5, h in -60.0..60.0f64, vv in -45.0..45.0f64) {
        let table = TemplateTable::builtin();
        let variant = PromptVariant::ALL[vi];
        let text = build_answer(&table, TaskKind::Distance, variant, AnswerValues { value: v, angles: Some((h, vv)) }).unwrap();
        let parsed = parse_answer(&table, TaskKind::Distance, variant, &text).unwrap();
        prop_assert_eq!(parsed.value, (v * 100.0).round() / 100.0);
        prop_assert!(parsed.format_ok);
    }

    #[test]
    fn delta1_symmetric_and_scale_free(g in 0.05..300.0f64, x in -0.5..0.5f64, s in 1e-3..1e3f64) {
        let p = g * x.exp();
        let ratio = (p / g).max(g / p);
        prop_assume!((ratio - 1.25).abs() > 1e-12);
        let d = delta1(p, g, Delta1Mode::Ratio);
        prop_assert_eq!(d, delta1(g, p, Delta1Mode::Ratio));
        prop_assert_eq!(d, delta1(s * p, s * g, Delta1Mode::Ratio));
        prop_assert_eq!(per_sample_metric(MetricKind::L1, p, g).unwrap(), (p - g).abs());
    }
}
