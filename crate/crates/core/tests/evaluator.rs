mod common;

use std::path::PathBuf;

use densepack_core::coco::{self, Category, Dataset, Detection, ImageRecord};
use densepack_core::eval::{evaluate, evaluate_files, EvalConfig, EvalResult};
use densepack_core::geometry::{iou, BBox, ImageSize};
use densepack_core::synth;
use proptest::prelude::*;
use serde::{Deserialize, Serialize};

fn assert_matches_oracle(gt: &Dataset, dets: &[Detection], cfg: &EvalConfig) {
    let got = evaluate(gt, dets, cfg).unwrap();
    let want = common::oracle_evaluate(gt, dets, &cfg.max_dets);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6;
    assert!(close(got.map, want.map), "mAP {} vs {}", got.map, want.map);
    assert!(close(got.ap50.unwrap_or(0.0), want.ap50));
    assert!(close(got.ap75.unwrap_or(0.0), want.ap75));
    for (m, r) in &want.ar {
        assert!(close(got.ar_at(*m).unwrap(), *r), "AR@{m}");
    }
}

#[test]
fn agrees_with_naive_oracle() {
    let mut rng = synth::rng(5);
    let cfg = EvalConfig::default();
    for _ in 0..100 {
        let (gt, dets) = common::random_scene(&mut rng);
        assert_matches_oracle(&gt, &dets, &cfg);
    }
}

#[test]
fn agrees_with_oracle_under_tight_detection_caps() {
    let mut rng = synth::rng(6);
    let cfg = EvalConfig {
        max_dets: vec![1, 2, 3],
        ..EvalConfig::default()
    };
    for _ in 0..50 {
        let (gt, dets) = common::random_scene(&mut rng);
        assert_matches_oracle(&gt, &dets, &cfg);
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Golden {
    map: f64,
    ap50: f64,
    ap75: f64,
    ar: Vec<(usize, f64)>,
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// The golden numbers come from the oracle. Set `DENSEPACK_BLESS=1` to
/// regenerate them after changing the fixture pair.
#[test]
fn fixture_pair_matches_golden() {
    let dir = fixtures();
    let gt = coco::load_dataset(dir.join("eval_gt.json"), Default::default()).unwrap();
    let dets = coco::load_detections(dir.join("eval_dets.json"), &gt).unwrap();
    let golden_path = dir.join("eval_golden.json");
    if std::env::var_os("DENSEPACK_BLESS").is_some() {
        let o = common::oracle_evaluate(&gt, &dets, &[1, 10, 300]);
        let g = Golden { map: o.map, ap50: o.ap50, ap75: o.ap75, ar: o.ar };
        std::fs::write(&golden_path, serde_json::to_string_pretty(&g).unwrap() + "\n").unwrap();
    }
    let golden: Golden = serde_json::from_slice(&std::fs::read(&golden_path).unwrap()).unwrap();
    let r = evaluate_files(dir.join("eval_gt.json"), dir.join("eval_dets.json"), &EvalConfig::default()).unwrap();
    assert!((r.map - golden.map).abs() <= 1e-6);
    assert!((r.ap50.unwrap() - golden.ap50).abs() <= 1e-6);
    assert!((r.ap75.unwrap() - golden.ap75).abs() <= 1e-6);
    for (m, v) in golden.ar {
        assert!((r.ar_at(m).unwrap() - v).abs() <= 1e-6);
    }
    assert!(r.map > 0.0 && r.map < 1.0, "fixture should be non-trivial");
}

#[test]
fn empty_files_give_zero_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let gt = Dataset {
        images: vec![ImageRecord { id: 1, file_name: "a.jpg".into(), size: ImageSize { width: 10, height: 10 } }],
        annotations: vec![],
        categories: vec![Category { id: 1, name: "object".into(), supercategory: None }],
        info: None,
        licenses: None,
    };
    coco::save_dataset(&gt, dir.path().join("gt.json")).unwrap();
    coco::save_detections(&[], dir.path().join("dets.json")).unwrap();
    let r = evaluate_files(dir.path().join("gt.json"), dir.path().join("dets.json"), &EvalConfig::default()).unwrap();
    assert_eq!(r.map, 0.0);
    assert!(r.ar.iter().all(|a| a.recall == 0.0));
    assert!(!r.warnings.is_empty());
}

#[test]
fn unknown_image_in_detection_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let gt = synth::synthetic_dataset(&synth::SynthConfig { images: 1, boxes_per_image: 2, ..Default::default() });
    coco::save_dataset(&gt, dir.path().join("gt.json")).unwrap();
    let mut dets = synth::perfect_detections(&gt, 1.0);
    dets[0].image_id = 99;
    coco::save_detections(&dets, dir.path().join("dets.json")).unwrap();
    let err = evaluate_files(dir.path().join("gt.json"), dir.path().join("dets.json"), &EvalConfig::default())
        .unwrap_err();
    assert!(err.to_string().contains("99"), "{err}");
}

fn scene_strategy() -> impl Strategy<Value = (Dataset, Vec<Detection>)> {
    any::<u64>().prop_map(|seed| common::random_scene(&mut synth::rng(seed)))
}

fn all_aps(r: &EvalResult) -> Vec<f64> {
    let mut v = vec![r.map, r.ap50.unwrap_or(0.0), r.ap75.unwrap_or(0.0)];
    v.extend(r.by_area.iter().map(|a| a.ap));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn low_scoring_false_positive_never_helps((gt, mut dets) in scene_strategy(), img in 1u64..=3) {
        let cfg = EvalConfig::default();
        let before = evaluate(&gt, &dets, &cfg).unwrap();
        let img = img.min(gt.images.len() as u64);
        // far away from every box of the 100x100 scene
        dets.push(Detection {
            image_id: img,
            category_id: 1,
            bbox: BBox::new(150.0, 150.0, 170.0, 170.0).unwrap(),
            score: 0.01,
        });
        let after = evaluate(&gt, &dets, &cfg).unwrap();
        for (a, b) in all_aps(&after).into_iter().zip(all_aps(&before)) {
            prop_assert!(a <= b + 1e-12);
        }
    }

    #[test]
    fn duplicating_a_detection_never_raises_ap((gt, mut dets) in scene_strategy(), pick in any::<prop::sample::Index>()) {
        prop_assume!(!dets.is_empty());
        let mut dup = dets[pick.index(dets.len())].clone();
        // a box reaching two ground-truth boxes lets its copy take the second
        // one earlier in the ranking, which can raise AP
        let reachable = gt
            .annotations
            .iter()
            .filter(|a| a.image_id == dup.image_id && a.category_id == dup.category_id)
            .filter(|a| iou(&a.bbox, &dup.bbox) >= 0.5)
            .count();
        prop_assume!(reachable <= 1);
        let cfg = EvalConfig::default();
        let before = evaluate(&gt, &dets, &cfg).unwrap();
        dup.score *= 0.5;
        dets.push(dup);
        let after = evaluate(&gt, &dets, &cfg).unwrap();
        for (a, b) in after.pr_curves.iter().zip(&before.pr_curves) {
            let ap = |p: &[f64]| p.iter().sum::<f64>() / p.len() as f64;
            prop_assert!(ap(&a.precision) <= ap(&b.precision) + 1e-12);
        }
    }

    #[test]
    fn recall_grows_with_max_dets((gt, dets) in scene_strategy()) {
        let cfg = EvalConfig { max_dets: vec![1, 2, 4, 10, 300], ..EvalConfig::default() };
        let r = evaluate(&gt, &dets, &cfg).unwrap();
        for w in r.ar.windows(2) {
            prop_assert!(w[0].recall <= w[1].recall + 1e-12);
        }
    }

    #[test]
    fn metrics_depend_only_on_ranking((gt, dets) in scene_strategy(), k in 0.05f64..1.0) {
        let cfg = EvalConfig::default();
        let scaled: Vec<Detection> = dets.iter().map(|d| Detection { score: d.score * k, ..d.clone() }).collect();
        let a = evaluate(&gt, &dets, &cfg).unwrap();
        let b = evaluate(&gt, &scaled, &cfg).unwrap();
        prop_assert_eq!(all_aps(&a), all_aps(&b));
        prop_assert_eq!(a.ar, b.ar);
    }

    #[test]
    fn metrics_are_bounded((gt, dets) in scene_strategy()) {
        let r = evaluate(&gt, &dets, &EvalConfig::default()).unwrap();
        for v in all_aps(&r).into_iter().chain(r.ar.iter().map(|a| a.recall)) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
