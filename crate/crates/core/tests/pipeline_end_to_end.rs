//! End-to-end pipeline tests: dataset generation through loading,
//! checkpoint round-trips, and cross-validation determinism.

use nemakit::data::loader::{load_dataset, LoadOptions};
use nemakit::data::synthetic::generate_synthetic_dataset;
use nemakit::engine::tape::Tape;
use nemakit::engine::tensor::Tensor;
use nemakit::model::checkpoint::{load_checkpoint, save_checkpoint};
use nemakit::model::zoo::build_nemanet;
use nemakit::train::trainer::{run_cross_validation, FoldOutcome};
use nemakit::train::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generate → scan → load: the synthetic fixture comes back with the
/// declared shape, balanced labels, and sorted class names, and
/// regeneration with identical arguments reproduces the checksum.
#[test]
fn synthetic_dataset_loads_with_declared_shapes_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_synthetic_dataset(dir.path(), 3, 6, 48, 11).unwrap();
    assert_eq!(manifest.classes.len(), 3);
    assert_eq!(manifest.records.len(), 18);
    let mut sorted = manifest.classes.clone();
    sorted.sort();
    assert_eq!(manifest.classes, sorted, "class names must be lexicographic");

    let opts = LoadOptions { input_size: 32, roi: true, median_filter: false };
    let loaded = load_dataset(&manifest, &opts).unwrap();
    assert_eq!(loaded.images.len(), 18);
    assert_eq!(loaded.labels.len(), 18);
    assert_eq!(loaded.classes, manifest.classes);
    for img in &loaded.images {
        assert_eq!(img.shape(), &[3, 32, 32]);
        assert!(
            img.data().iter().all(|v| (0.0..=1.0).contains(v)),
            "pixels must be normalized to [0, 1]"
        );
    }
    let mut per_class = [0usize; 3];
    for &l in &loaded.labels {
        per_class[l] += 1;
    }
    assert_eq!(per_class, [6, 6, 6]);

    // Byte-identical regeneration: same arguments, same checksum.
    let dir2 = tempfile::tempdir().unwrap();
    let again = generate_synthetic_dataset(dir2.path(), 3, 6, 48, 11).unwrap();
    assert_eq!(again.checksum, manifest.checksum);

    // A different seed must not collide.
    let dir3 = tempfile::tempdir().unwrap();
    let other = generate_synthetic_dataset(dir3.path(), 3, 6, 48, 12).unwrap();
    assert_ne!(other.checksum, manifest.checksum);
}

/// Save → load restores every parameter bit-for-bit: a model loaded from a
/// checkpoint produces bitwise-identical logits on the same input, even when
/// the receiving model was built from a different seed.
#[test]
fn checkpoint_round_trip_preserves_outputs_exactly() {
    let widths = TrainConfig::default().inception_widths;
    let model = build_nemanet::<f32>(3, 16, &widths, 32, 7).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 2 * 3 * 32 * 32;
    let x = Tensor::new(
        vec![2, 3, 32, 32],
        (0..n).map(|_| rng.gen_range(0.0f32..1.0)).collect(),
    )
    .unwrap();

    let mut tape = Tape::inference();
    let out = model.forward_eval(&mut tape, &x).unwrap();
    let before = tape.value(out).data().to_vec();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.nema");
    save_checkpoint(&model, &path).unwrap();

    let mut restored = build_nemanet::<f32>(3, 16, &widths, 32, 8).unwrap();
    load_checkpoint(&mut restored, &path).unwrap();

    let mut tape2 = Tape::inference();
    let out2 = restored.forward_eval(&mut tape2, &x).unwrap();
    let after = tape2.value(out2).data().to_vec();

    assert_eq!(before.len(), after.len());
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.to_bits(), b.to_bits(), "logits must round-trip bitwise");
    }
}

/// Loading a checkpoint into a mismatched architecture is refused.
#[test]
fn checkpoint_rejects_mismatched_architecture() {
    let widths = TrainConfig::default().inception_widths;
    let model = build_nemanet::<f32>(3, 16, &widths, 32, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.nema");
    save_checkpoint(&model, &path).unwrap();

    let mut other = build_nemanet::<f32>(4, 16, &widths, 32, 7).unwrap();
    assert!(load_checkpoint(&mut other, &path).is_err(), "head shape differs; strict load must fail");
}

fn tiny_inputs(seed: u64) -> (Vec<Tensor<f32>>, Vec<usize>, Vec<String>) {
    // Two linearly separable blob classes so two epochs actually move the
    // loss; determinism is the property under test, not accuracy.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for class in 0..2usize {
        for _ in 0..10 {
            let base = 0.2 + 0.5 * class as f32;
            let data: Vec<f32> =
                (0..3 * 32 * 32).map(|_| base + rng.gen_range(-0.1f32..0.1)).collect();
            images.push(Tensor::new(vec![3, 32, 32], data).unwrap());
            labels.push(class);
        }
    }
    (images, labels, vec!["a".into(), "b".into()])
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        input_size: 32,
        width_divisor: 16,
        batch_size: 4,
        epochs: 2,
        folds: 2,
        clr_step_size: 8,
        seed: 5,
        ..TrainConfig::default()
    }
}

/// Identical seeds give bitwise-identical cross-validation runs, and the
/// parallel execution path reproduces the serial one exactly.
#[test]
fn cross_validation_is_deterministic_and_parallel_matches_serial() {
    let (images, labels, classes) = tiny_inputs(3);
    let cfg = tiny_config();
    let widths = cfg.inception_widths.clone();
    let build = move |seed: u64| build_nemanet::<f32>(2, 16, &widths, 32, seed);

    let run = |parallel: bool| {
        run_cross_validation(&build, &images, &labels, &classes, &cfg, parallel).unwrap()
    };
    let serial = run(false);
    let repeat = run(false);
    let parallel = run(true);

    assert_eq!(serial.plan, repeat.plan);
    assert_eq!(serial.plan, parallel.plan);
    assert_eq!(serial.reports.len(), 2);

    for (a, b) in serial.reports.iter().zip(&repeat.reports) {
        let (ra, rb) = match (&a.outcome, &b.outcome) {
            (FoldOutcome::Completed { result: ra, .. }, FoldOutcome::Completed { result: rb, .. }) => (ra, rb),
            _ => panic!("fold {} did not complete in both runs", a.fold),
        };
        assert_eq!(ra.history, rb.history, "fold {} history must be bitwise identical", a.fold);
    }
    for (a, b) in serial.reports.iter().zip(&parallel.reports) {
        let (ra, rb) = match (&a.outcome, &b.outcome) {
            (FoldOutcome::Completed { result: ra, .. }, FoldOutcome::Completed { result: rb, .. }) => (ra, rb),
            _ => panic!("fold {} did not complete in both runs", a.fold),
        };
        assert_eq!(ra.history, rb.history, "parallel fold {} must match serial", a.fold);
    }

    let agg = serial.aggregate.expect("completed folds must aggregate");
    assert!(agg.accuracy.mean.is_finite());
}

/// `folds == 1` trains a single holdout against a 5-fold plan.
#[test]
fn single_fold_mode_trains_one_holdout_of_a_five_fold_plan() {
    let (images, labels, classes) = tiny_inputs(4);
    let mut cfg = tiny_config();
    cfg.folds = 1;
    let widths = cfg.inception_widths.clone();
    let build = move |seed: u64| build_nemanet::<f32>(2, 16, &widths, 32, seed);

    let cv = run_cross_validation(&build, &images, &labels, &classes, &cfg, false).unwrap();
    assert_eq!(cv.plan.k, 5, "plan stays 5-fold");
    assert_eq!(cv.reports.len(), 1, "but only the first fold runs");
    assert_eq!(cv.reports[0].fold, 0);
    assert!(matches!(cv.reports[0].outcome, FoldOutcome::Completed { .. }));
}
