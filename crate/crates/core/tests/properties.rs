use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gfs_dcf::config::{tracker_config_from_str, tracker_config_to_string};
use gfs_dcf::eval::{compute_metrics, iou, rank_diagnostic};
use gfs_dcf::solver::{dcf_closed_form, group_shrink, prune_by_ratio, ResponseLabel};
use gfs_dcf::tensor::{circ_correlate, RealMatrix, RealTensor3};
use gfs_dcf::tracker::{BoundingBox, TrackerConfig, Variant};

fn int_box() -> impl Strategy<Value = BoundingBox> {
    (0i32..200, 0i32..200, 1i32..60, 1i32..60)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x as f64, y as f64, w as f64, h as f64))
}

fn tensor(seed: u64, n: usize, c: usize) -> RealTensor3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealTensor3::from_fn(n, c, |_, _, _| rng.random_range(-1.0..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn iou_is_symmetric_bounded_and_one_only_for_equal_boxes(a in int_box(), b in int_box()) {
        let v = iou(&a, &b);
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(iou(&a, &a), 1.0);
        if a != b {
            prop_assert!(v < 1.0);
        }
    }

    #[test]
    fn metrics_ignore_a_common_translation(
        pairs in prop::collection::vec((int_box(), int_box()), 1..20),
        dx in -50i32..50,
        dy in -50i32..50,
    ) {
        let (pred, gt): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let shift = |v: &[BoundingBox]| -> Vec<BoundingBox> {
            v.iter().map(|b| BoundingBox::new(b.x + dx as f64, b.y + dy as f64, b.w, b.h)).collect()
        };
        let m = compute_metrics(&pred, &gt, 20.0, 0.5).unwrap();
        let t = compute_metrics(&shift(&pred), &shift(&gt), 20.0, 0.5).unwrap();
        prop_assert_eq!(m.precision_curve, t.precision_curve);
        prop_assert_eq!(m.success_curve, t.success_curve);
        prop_assert!((m.mean_cle - t.mean_cle).abs() < 1e-9);
    }

    #[test]
    fn copies_plus_one_orthogonal_filter_have_rank_two(seed in any::<u64>(), len in 4usize..40, k in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uu: f64 = u.iter().map(|a| a * a).sum();
        prop_assume!(uu > 1e-3);
        let proj = u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / uu;
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi -= proj * ui;
        }
        prop_assume!(v.iter().map(|a| a * a).sum::<f64>() > 1e-3 * uu);
        let mut history = vec![u; k];
        history.push(v);
        prop_assert_eq!(rank_diagnostic(&history, 1e-3).unwrap().numerical_rank, 2);
    }

    #[test]
    fn pruning_keeps_the_rounded_count_of_largest(attrs in prop::collection::vec(0.0f64..1.0, 1..100), r in 0.01f64..=1.0) {
        let mask = prune_by_ratio(&attrs, r).unwrap();
        let keep = (r * attrs.len() as f64).round() as usize;
        prop_assert_eq!(mask.iter().filter(|&&m| m).count(), keep);
        let min_kept = attrs.iter().zip(&mask).filter(|p| *p.1).map(|p| *p.0).fold(f64::INFINITY, f64::min);
        let max_dropped = attrs.iter().zip(&mask).filter(|p| !*p.1).map(|p| *p.0).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(keep == 0 || max_dropped <= min_kept);
    }

    #[test]
    fn shrink_scales_each_entry_towards_zero(seed in any::<u64>(), n in 1usize..6, c in 1usize..4,
                                             mu in 0.1f64..10.0, lc in 0.0f64..3.0, ls in 0.0f64..3.0) {
        let p = tensor(seed, n, c);
        let w = group_shrink(&p, mu, lc, ls);
        for (a, b) in w.data().iter().zip(p.data()) {
            prop_assert!(a.abs() <= b.abs());
            prop_assert!(a * b >= 0.0);
        }
    }

    #[test]
    fn unregularised_closed_form_interpolates_the_label(seed in any::<u64>(), n in 2usize..7, c in 1usize..4) {
        let x = tensor(seed, n, c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let y = ResponseLabel::from_spatial(RealMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let w = dcf_closed_form(&x, &y, 0.0).unwrap();
        let r = circ_correlate(&x, &w).unwrap();
        for (a, b) in r.data().iter().zip(y.spatial().data()) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn tracker_config_text_round_trips(
        alpha in 0.0f64..=1.0,
        ls in 0.0f64..100.0,
        lc in 0.0f64..100.0,
        lt in 0.0f64..1e4,
        rc in 0.01f64..=1.0,
        rs in 0.01f64..=1.0,
        v in 0usize..5,
        history in any::<bool>(),
    ) {
        let mut cfg = TrackerConfig { alpha, variant: Variant::ALL[v], keep_history: history, ..TrackerConfig::default() };
        cfg.reg.lambda_spatial = ls;
        cfg.reg.lambda_channel = lc;
        cfg.reg.lambda_temporal = lt;
        cfg.sel.channel_ratio = rc;
        cfg.sel.spatial_ratio = rs;
        let text = tracker_config_to_string(&cfg);
        prop_assert_eq!(tracker_config_from_str(&text, Path::new("p.cfg")).unwrap(), cfg);
    }
}
