use std::collections::HashSet;

use lanesim::signeval::{
    baseline_classifier_train, bench, build_manifest, default_labels, evaluate, parse_perturbations,
    perturb_all, split_counts, write_synthetic_dataset, Classifier, DatasetManifest, Split,
    DEFAULT_FRACTIONS, DEFAULT_REJECT_THRESHOLD,
};
use proptest::prelude::*;

fn dataset(per_class: usize, seed: u64) -> (tempfile::TempDir, DatasetManifest) {
    let dir = tempfile::tempdir().unwrap();
    let labels = default_labels();
    write_synthetic_dataset(dir.path(), &labels, per_class, 0.02, seed).unwrap();
    let m = build_manifest(dir.path(), &labels, DEFAULT_FRACTIONS, seed).unwrap();
    (dir, m)
}

#[test]
fn manifest_splits_each_class() {
    let (_dir, m) = dataset(23, 4);
    let paths: HashSet<_> = m.entries.iter().map(|e| e.path.clone()).collect();
    assert_eq!(paths.len(), m.entries.len());
    assert_eq!(m.entries.len(), 23 * 7);
    let (tr, va, te) = split_counts(23, DEFAULT_FRACTIONS);
    assert_eq!(m.class_counts(Split::Train), vec![tr; 7]);
    assert_eq!(m.class_counts(Split::Val), vec![va; 7]);
    assert_eq!(m.class_counts(Split::Test), vec![te; 7]);
    for (count, f) in [tr, va, te].iter().zip(DEFAULT_FRACTIONS) {
        assert!((*count as f64 - 23.0 * f).abs() <= 1.0);
    }
}

#[test]
fn manifest_is_seeded_and_survives_a_save() {
    let (dir, a) = dataset(10, 8);
    let again = build_manifest(dir.path(), &default_labels(), DEFAULT_FRACTIONS, 8).unwrap();
    assert_eq!(a, again);
    let other = build_manifest(dir.path(), &default_labels(), DEFAULT_FRACTIONS, 9).unwrap();
    assert_ne!(a.entries, other.entries);
    let path = dir.path().join("manifest.json");
    a.save(&path).unwrap();
    assert_eq!(DatasetManifest::load(&path).unwrap(), a);
}

#[test]
fn stray_directory_is_rejected() {
    let (dir, _) = dataset(3, 1);
    std::fs::create_dir(dir.path().join("speed_bump")).unwrap();
    assert!(build_manifest(dir.path(), &default_labels(), DEFAULT_FRACTIONS, 1).is_err());
}

#[test]
fn baseline_on_the_test_split() {
    let (_dir, m) = dataset(40, 2);
    let model = baseline_classifier_train(&m, DEFAULT_REJECT_THRESHOLD).unwrap();
    let report = evaluate(&model, &m, Split::Test, &[], 0).unwrap();
    assert_eq!(report.samples, m.split(Split::Test).count());
    let rows: Vec<u64> = report.matrix.counts().iter().map(|r| r.iter().sum()).collect();
    let expected: Vec<u64> = m.class_counts(Split::Test).iter().map(|&c| c as u64).collect();
    assert_eq!(rows, expected);
    assert!(report.accuracy >= 0.95, "{}", report.accuracy);

    let blurred = parse_perturbations("motion_blur=3").unwrap();
    let again = evaluate(&model, &m, Split::Test, &blurred, 5).unwrap();
    assert_eq!(again, evaluate(&model, &m, Split::Test, &blurred, 5).unwrap());
}

#[test]
fn bench_reports_stable_accuracy() {
    let (_dir, m) = dataset(10, 3);
    let model = baseline_classifier_train(&m, DEFAULT_REJECT_THRESHOLD).unwrap();
    let samples = m.load_split(Split::Test).unwrap();
    let a = bench(&model, &samples, 5, 50).unwrap();
    let b = bench(&model, &samples, 5, 50).unwrap();
    assert_eq!((a.accuracy, a.macro_f1), (b.accuracy, b.macro_f1));
    assert_eq!(a.reps, 50);
    // fps is measured over the whole loop, so it can only be slower than
    // the per-call mean implies
    assert!(a.fps <= 1000.0 / a.avg_inference_ms * 1.1);
}

#[test]
fn predictions_stay_in_the_label_set() {
    let (_dir, m) = dataset(6, 6);
    let model = baseline_classifier_train(&m, DEFAULT_REJECT_THRESHOLD).unwrap();
    let noisy = parse_perturbations("noise=0.3,color=90:0.2:-0.3").unwrap();
    for (i, (frame, _)) in m.load_split(Split::Train).unwrap().iter().enumerate() {
        let f = perturb_all(frame, &noisy, i as u64).unwrap();
        let p = model.classify(&f).unwrap();
        assert!(p.class_id < model.labels().len());
        assert_eq!(p, model.classify(&f).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn split_counts_cover_every_image(n in 0usize..5000) {
        let (tr, va, te) = split_counts(n, DEFAULT_FRACTIONS);
        prop_assert_eq!(tr + va + te, n);
        prop_assert!((tr as f64 - 0.70 * n as f64).abs() <= 1.0);
        prop_assert!((va as f64 - 0.15 * n as f64).abs() <= 1.0);
        prop_assert!((te as f64 - 0.15 * n as f64).abs() <= 2.0);
    }
}
