//! Acceptance suite: one test per shipping criterion, each printing a
//! single PASS line with the measured value and its budget. Run with
//! `cargo test --test acceptance` (add `-- --nocapture` to see the PASS
//! lines of successful criteria).

use std::process::Command;
use std::time::Instant;

use nemakit::data::{generate_pretext_dataset, generate_synthetic_dataset, load_dataset, LoadOptions};
use nemakit::engine::tensor::Tensor;
use nemakit::eval::{evaluate_split, metrics_from_cm, roc_auc};
use nemakit::model::{build_by_name, build_densenet121, build_nemanet, save_checkpoint};
use nemakit::train::{
    make_folds, run_cross_validation, transfer_init, ClrSchedule, FoldOutcome, TrainConfig,
    TrainHistory,
};
use nemakit::verify::{check_blocks, check_ops, corrupted_control, CheckRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_nemakit");

/// Criterion 1 — the parameter-count oracle. `describe` on the plain
/// backbone at 1000 classes must report exactly 8,062,504 parameters,
/// in under five seconds.
#[test]
fn c01_backbone_parameter_count_is_exact() {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(["describe", "--model", "densenet121", "--classes", "1000"])
        .output()
        .expect("binary spawns");
    let elapsed = start.elapsed();
    assert!(out.status.success(), "describe failed: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("total parameters: 8062504 (8,062,504)"),
        "expected exact canonical total, got:\n{text}"
    );
    assert!(elapsed.as_secs_f64() < 5.0, "describe took {elapsed:?}, budget 5 s");
    println!(
        "criterion 1 PASS — densenet121/1000 total parameters exactly 8,062,504 ({:.2}s < 5s)",
        elapsed.as_secs_f64()
    );
}

/// Criterion 2 — the hybrid census. total == trainable + non-trainable must
/// hold exactly; the deviation from the published reference totals
/// (17,918,565 / 17,817,925 / 100,640) is reported, not gated, because the
/// reference leaves several branch widths open.
#[test]
fn c02_hybrid_census_identity_holds_and_deviation_is_reported() {
    let cfg = TrainConfig::default();
    let model = build_nemanet::<f32>(5, 1, &cfg.inception_widths, 224, 23).unwrap();
    let census = model.census();
    assert_eq!(
        census.total,
        census.trainable + census.non_trainable,
        "census identity must hold exactly"
    );
    let (rt, rtr, rnt) = (17_918_565i64, 17_817_925i64, 100_640i64);
    println!(
        "criterion 2 PASS — census identity exact; totals {}/{}/{} deviate from the \
         reference {}/{}/{} by {:+}/{:+}/{:+} (reported, not gated)",
        census.total,
        census.trainable,
        census.non_trainable,
        rt,
        rtr,
        rnt,
        census.total as i64 - rt,
        census.trainable as i64 - rtr,
        census.non_trainable as i64 - rnt,
    );
}

fn group_coverage(rows: &[CheckRow]) -> Vec<(String, usize)> {
    // Rows are named "<type> <shape-ish suffix>" or "<type> #<trial> (...)";
    // the type key is everything before " #", else the first token.
    let mut counts: Vec<(String, usize)> = Vec::new();
    for row in rows {
        let key = match row.name.split_once(" #") {
            Some((head, _)) => head.to_string(),
            None => row.name.split_whitespace().next().unwrap_or("").to_string(),
        };
        match counts.iter_mut().find(|(k, _)| *k == key) {
            Some((_, n)) => *n += 1,
            None => counts.push((key, 1)),
        }
    }
    counts
}

fn assert_all_passed(rows: &[CheckRow], rel_tol: f64, what: &str) {
    for row in rows {
        assert_eq!(row.rel_tol, rel_tol, "{what}: `{}` ran at tolerance {}", row.name, row.rel_tol);
        assert!(
            row.passed,
            "{what}: `{}` failed (max rel err {:.3e}, tol {:.0e}) {}",
            row.name, row.max_rel_err, row.rel_tol, row.detail
        );
    }
    for (key, n) in group_coverage(rows) {
        assert!(n >= 3, "{what}: `{key}` checked on {n} shapes, need at least 3");
    }
}

/// Criterion 3 — the gradient suite. Every operator and block type passes
/// central finite differences at 1e-2 in f32 and 1e-5 in f64, at least three
/// random shapes each, within two minutes; and a deliberately corrupted
/// gradient is caught, proving the checker can fail.
#[test]
fn c03_gradient_suite_passes_at_both_precisions() {
    let start = Instant::now();
    let seed = 7;
    let mut f32_rows = check_ops::<f32>(seed);
    f32_rows.extend(check_blocks::<f32>(seed));
    assert_all_passed(&f32_rows, 1e-2, "f32");
    let mut f64_rows = check_ops::<f64>(seed);
    f64_rows.extend(check_blocks::<f64>(seed));
    assert_all_passed(&f64_rows, 1e-5, "f64");
    for row in corrupted_control::<f32>(seed) {
        assert!(!row.passed, "corrupted control `{}` slipped through", row.name);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "gradient suite took {elapsed:?}, budget 2 min");
    println!(
        "criterion 3 PASS — {} f32 checks at 1e-2 and {} f64 checks at 1e-5, \
         >=3 shapes per type, corrupted control rejected ({:.1}s < 120s)",
        f32_rows.len(),
        f64_rows.len(),
        elapsed.as_secs_f64()
    );
}

/// Criterion 4 — metric oracles. Micro metrics match hand-tallied
/// tp/fp/tn/fn on 1,000 random confusion matrices (integer tallies compared
/// exactly, ratio metrics as the correctly rounded quotient of those
/// integers); AUC matches a pair-counting oracle within 1e-9 on 200 random
/// score sets. Under one minute.
#[test]
fn c04_metric_and_auc_oracles_agree() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    for case in 0..1000 {
        let k = rng.gen_range(2..=7usize);
        let mut counts = vec![vec![0usize; k]; k];
        for row in counts.iter_mut() {
            for cell in row.iter_mut() {
                *cell = rng.gen_range(0..=40);
            }
        }
        counts[rng.gen_range(0..k)][rng.gen_range(0..k)] += 1; // never empty
        let total: usize = counts.iter().flatten().sum();
        let cm = nemakit::eval::ConfusionMatrix { n_classes: k, counts: counts.clone() };
        let m = metrics_from_cm(&cm).unwrap();

        // Hand tallies straight from the definition of a one-vs-rest table.
        let mut tp_sum = 0usize;
        let mut fp_sum = 0usize;
        let mut tn_sum = 0usize;
        let mut fn_sum = 0usize;
        for c in 0..k {
            let tp = counts[c][c];
            let row: usize = counts[c].iter().sum();
            let col: usize = counts.iter().map(|r| r[c]).sum();
            let fp = col - tp;
            let fn_ = row - tp;
            let tn = total - tp - fp - fn_;
            let got = &m.per_class[c];
            assert_eq!(
                (got.tp, got.fp, got.tn, got.fn_),
                (tp, fp, tn, fn_),
                "case {case} class {c} tallies"
            );
            tp_sum += tp;
            fp_sum += fp;
            tn_sum += tn;
            fn_sum += fn_;
        }
        assert_eq!(m.accuracy, tp_sum as f64 / total as f64, "case {case} accuracy");
        assert_eq!(m.precision, tp_sum as f64 / (tp_sum + fp_sum) as f64, "case {case} precision");
        assert_eq!(m.recall, tp_sum as f64 / (tp_sum + fn_sum) as f64, "case {case} recall");
        assert_eq!(
            m.specificity,
            tn_sum as f64 / (tn_sum + fp_sum) as f64,
            "case {case} specificity"
        );
        let (p, r) = (m.precision, m.recall);
        assert_eq!(m.f1, 2.0 * (p * r) / (p + r), "case {case} f1");
    }

    let mut auc_cases = 0usize;
    for case in 0..200 {
        let n = rng.gen_range(5..=40usize);
        let k = rng.gen_range(2..=5usize);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // A coarse score grid forces ties, the half-credit branch.
        let scores: Vec<Vec<f64>> =
            (0..n).map(|_| (0..k).map(|_| rng.gen_range(0..6) as f64 / 5.0).collect()).collect();
        let curve = roc_auc(&scores, &labels).unwrap();
        for class in 0..k {
            let pos: Vec<f64> =
                (0..n).filter(|&i| labels[i] == class).map(|i| scores[i][class]).collect();
            let neg: Vec<f64> =
                (0..n).filter(|&i| labels[i] != class).map(|i| scores[i][class]).collect();
            if pos.is_empty() || neg.is_empty() {
                assert!(curve.skipped.contains(&class), "case {case} class {class} not skipped");
                continue;
            }
            let mut credit = 0.0;
            for &p in &pos {
                for &q in &neg {
                    credit += if p > q {
                        1.0
                    } else if p == q {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
            let oracle = credit / (pos.len() * neg.len()) as f64;
            let got = curve.per_class[class].auc.expect("unskipped class has an AUC");
            assert!(
                (got - oracle).abs() <= 1e-9,
                "case {case} class {class}: auc {got} vs pair-counting {oracle}"
            );
            auc_cases += 1;
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "metric oracles took {elapsed:?}, budget 1 min");
    println!(
        "criterion 4 PASS — 1000 confusion matrices tally-exact, {auc_cases} per-class AUCs \
         within 1e-9 of pair counting ({:.1}s < 60s)",
        elapsed.as_secs_f64()
    );
}

/// Criterion 5 — loss sanity. An untrained five-class model on a balanced
/// split scores cross-entropy ln 5 within 0.2 (the zero-initialized head
/// starts at the uniform prediction).
#[test]
fn c05_untrained_five_class_loss_is_ln_five() {
    let cfg = TrainConfig::default();
    let model = build_nemanet::<f32>(5, 16, &cfg.inception_widths, 32, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for class in 0..5usize {
        for _ in 0..4 {
            let data: Vec<f32> = (0..3 * 32 * 32).map(|_| rng.gen_range(0.0..1.0)).collect();
            images.push(Tensor::new(vec![3, 32, 32], data).unwrap());
            labels.push(class);
        }
    }
    let indices: Vec<usize> = (0..images.len()).collect();
    let evaluation = evaluate_split(&model, &images, &labels, &indices, 8).unwrap();
    let loss = evaluation.metrics.loss.expect("evaluation reports a loss");
    let ln5 = (5.0f64).ln();
    assert!(
        (loss - ln5).abs() <= 0.2,
        "untrained loss {loss:.6} not within 0.2 of ln 5 = {ln5:.6}"
    );
    println!("criterion 5 PASS — untrained 5-class loss {loss:.6} within 0.2 of ln 5 ({ln5:.6})");
}

/// Criterion 6 — fold properties. On 500 random manifests, the stratified
/// plan is a partition with overall and per-class fold sizes balanced to
/// within one.
#[test]
fn c06_stratified_folds_balance_on_500_manifests() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    for case in 0..500 {
        let k = rng.gen_range(2..=8usize);
        let n_classes = rng.gen_range(2..=6usize);
        let mut labels = Vec::new();
        for class in 0..n_classes {
            let members = rng.gen_range(k..=k + 30);
            labels.extend(std::iter::repeat(class).take(members));
        }
        // Shuffle so class runs do not hide ordering bugs.
        for i in (1..labels.len()).rev() {
            labels.swap(i, rng.gen_range(0..=i));
        }
        let names: Vec<String> = (0..n_classes).map(|c| format!("class{c}")).collect();
        let plan = make_folds(&labels, &names, k, rng.gen()).unwrap();
        assert_eq!(plan.k, k);

        // Partition: disjoint and covering.
        let mut seen: Vec<usize> = plan.folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..labels.len()).collect::<Vec<_>>(), "case {case}: not a partition");

        // Overall balance within one.
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.len()).collect();
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(max - min <= 1, "case {case}: fold sizes {sizes:?}");

        // Per-class balance within one.
        for class in 0..n_classes {
            let counts: Vec<usize> = plan
                .folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            let (min, max) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(max - min <= 1, "case {case} class {class}: per-class counts {counts:?}");
        }
    }
    println!("criterion 6 PASS — 500 random manifests: disjoint, covering, ±1 balanced overall and per class");
}

/// Criterion 7 — the cyclic schedule. With decay disabled the emitted trace
/// equals the tabulated triangular waveform exactly for four full cycles:
/// floor 6e-5 at iterations 0 and 2·step, peak 1e-3 at iteration step.
#[test]
fn c07_clr_trace_is_the_exact_triangular_waveform() {
    let (floor, peak, step) = (6e-5, 1e-3, 100usize);
    let schedule = ClrSchedule::new(floor, peak, step).unwrap();
    let n = 4 * 2 * step;
    let trace = schedule.trace(n);
    assert_eq!(trace.len(), n);
    for (i, &lr) in trace.iter().enumerate() {
        let pos = i % (2 * step);
        let frac = if pos <= step {
            pos as f64 / step as f64
        } else {
            (2 * step - pos) as f64 / step as f64
        };
        let expected = floor + (peak - floor) * frac;
        assert_eq!(lr, expected, "iteration {i}");
    }
    assert_eq!(trace[0], floor);
    assert_eq!(trace[step], peak);
    assert_eq!(trace[2 * step], floor);
    println!(
        "criterion 7 PASS — {} iterations bit-exact against the tabulated waveform; \
         floor {floor:e} at 0 and {}, peak {peak:e} at {}",
        n,
        2 * step,
        step
    );
}

fn desk_config() -> TrainConfig {
    TrainConfig {
        input_size: 64,
        width_divisor: 8,
        batch_size: 16,
        epochs: 30,
        folds: 5,
        lr_base: 2e-4,
        lr_peak: 4e-3,
        lr_final: 2e-5,
        clr_step_size: 75,
        seed: 23,
        ..TrainConfig::default()
    }
}

fn completed_history(outcome: &FoldOutcome<f32>) -> &TrainHistory {
    match outcome {
        FoldOutcome::Completed { result, .. } => &result.history,
        FoldOutcome::Failed { error } => panic!("fold failed: {error}"),
    }
}

/// Criterion 8 — desk-scale end to end. On the synthetic five-class fixture
/// (100 images per class, 64×64, fixed seed) a width-reduced hybrid reaches
/// at least 95% mean cross-validated accuracy within 30 epochs and 30
/// minutes of CPU wall time. The full-scale reference accuracies
/// (96.99%/98.03% from scratch, 98.88%/99.34% with transfer) need the real
/// image corpus and are recorded here as targets, not gates.
#[test]
fn c08_desk_scale_cross_validation_reaches_95_percent() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_synthetic_dataset(dir.path(), 5, 100, 64, 23).unwrap();
    let cfg = desk_config();
    let set = load_dataset(&manifest, &LoadOptions::from(&cfg)).unwrap();

    let widths = cfg.inception_widths.clone();
    let (classes, divisor, input) = (set.classes.len(), cfg.width_divisor, cfg.input_size);
    let build =
        move |seed: u64| build_nemanet::<f32>(classes, divisor, &widths, input, seed);
    let cv =
        run_cross_validation(&build, &set.images, &set.labels, &set.classes, &cfg, false).unwrap();

    let mut fold_accs = Vec::new();
    for report in &cv.reports {
        let history = completed_history(&report.outcome);
        assert!(history.rows.len() <= 30, "fold {} ran past 30 epochs", report.fold);
        fold_accs.push(history.best_val_accuracy);
    }
    let aggregate = cv.aggregate.expect("all folds completed");
    let mean = aggregate.accuracy.mean;
    let elapsed = start.elapsed();
    assert!(
        mean >= 0.95,
        "mean cross-validated accuracy {mean:.4} below 0.95 (folds: {fold_accs:?})"
    );
    assert!(
        elapsed.as_secs_f64() <= 1800.0,
        "desk-scale run took {elapsed:?}, budget 30 min"
    );
    println!(
        "criterion 8 PASS — mean 5-fold accuracy {:.4} >= 0.95 within 30 epochs \
         ({:.0}s <= 1800s); full-scale reference targets 96.99/98.03 FS and 98.88/99.34 TL \
         recorded, not gated",
        mean,
        elapsed.as_secs_f64()
    );
}

/// Criterion 9 — transfer wiring. A backbone-shaped checkpoint initializes
/// exactly the `features.*` name set (the branch and head stay at their
/// fresh values and are reported as such), and on the fixture a run with a
/// pretext-pretrained backbone reaches the from-scratch epoch-10 accuracy
/// at or before epoch 10.
#[test]
fn c09_transfer_initializes_backbone_and_converges_faster() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let widths = TrainConfig::default().inception_widths;

    // (a) The name-set contract, checked on the reduced geometry.
    let donor = build_densenet121::<f32>(4, 8, 64, 11).unwrap();
    let donor_path = dir.path().join("donor.nema");
    save_checkpoint(&donor, &donor_path).unwrap();
    let mut receiver = build_nemanet::<f32>(5, 8, &widths, 64, 12).unwrap();
    let report = transfer_init(&mut receiver, &donor_path).unwrap();

    let expected_matched: Vec<String> = receiver
        .params()
        .iter()
        .map(|(_, p)| p.name.clone())
        .filter(|n| n.starts_with("features."))
        .collect();
    let mut matched = report.matched.clone();
    matched.sort();
    let mut expected = expected_matched.clone();
    expected.sort();
    assert_eq!(matched, expected, "matched set must be exactly the backbone names");
    assert!(
        report.skipped_model.iter().all(|n| n.starts_with("inception.") || n.starts_with("head.")),
        "fresh-kept names outside the branch/head: {:?}",
        report.skipped_model
    );
    assert!(!report.skipped_model.is_empty(), "the branch and head must stay fresh");
    assert!(
        report.skipped_file.iter().all(|n| n.starts_with("classifier.")),
        "unused checkpoint entries should be the donor classifier: {:?}",
        report.skipped_file
    );

    // (b) Convergence: pretrain the backbone on the disjoint geometric
    // pretext task, then compare fixture training with and without it.
    let pretext_dir = dir.path().join("pretext");
    let pretext_manifest = generate_pretext_dataset(&pretext_dir, 50, 64, 23).unwrap();
    let mut pre_cfg = desk_config();
    pre_cfg.model = "densenet121".into();
    pre_cfg.folds = 1;
    pre_cfg.epochs = 8;
    let pre_set = load_dataset(&pretext_manifest, &LoadOptions::from(&pre_cfg)).unwrap();
    let pre_widths = pre_cfg.inception_widths.clone();
    let pre_build = move |seed: u64| {
        build_by_name::<f32>("densenet121", 4, 8, &pre_widths, 64, seed)
    };
    let pre_cv = run_cross_validation(
        &pre_build,
        &pre_set.images,
        &pre_set.labels,
        &pre_set.classes,
        &pre_cfg,
        false,
    )
    .unwrap();
    let backbone_path = dir.path().join("backbone.nema");
    match &pre_cv.reports[0].outcome {
        FoldOutcome::Completed { result, .. } => save_checkpoint(&result.model, &backbone_path).unwrap(),
        FoldOutcome::Failed { error } => panic!("pretext fold failed: {error}"),
    }

    let fixture_dir = dir.path().join("worms");
    let manifest = generate_synthetic_dataset(&fixture_dir, 5, 100, 64, 23).unwrap();
    let mut cfg = desk_config();
    cfg.folds = 1;
    cfg.epochs = 10;
    let set = load_dataset(&manifest, &LoadOptions::from(&cfg)).unwrap();

    let scratch_widths = cfg.inception_widths.clone();
    let scratch_build =
        move |seed: u64| build_nemanet::<f32>(5, 8, &scratch_widths, 64, seed);
    let scratch_cv = run_cross_validation(
        &scratch_build,
        &set.images,
        &set.labels,
        &set.classes,
        &cfg,
        false,
    )
    .unwrap();
    let scratch = completed_history(&scratch_cv.reports[0].outcome);

    let tl_widths = cfg.inception_widths.clone();
    let tl_path = backbone_path.clone();
    let tl_build = move |seed: u64| {
        let mut model = build_nemanet::<f32>(5, 8, &tl_widths, 64, seed)?;
        transfer_init(&mut model, &tl_path)?;
        Ok(model)
    };
    let tl_cv =
        run_cross_validation(&tl_build, &set.images, &set.labels, &set.classes, &cfg, false)
            .unwrap();
    let transferred = completed_history(&tl_cv.reports[0].outcome);

    let scratch_at_10 = scratch.rows[9].val_acc;
    let tl_best_by_10 =
        transferred.rows[..10].iter().map(|r| r.val_acc).fold(f64::MIN, f64::max);
    let reached_at = transferred
        .rows
        .iter()
        .position(|r| r.val_acc >= scratch_at_10)
        .map(|e| e + 1);
    assert!(
        tl_best_by_10 >= scratch_at_10,
        "transfer run reached {tl_best_by_10:.4} by epoch 10, from-scratch epoch-10 \
         accuracy is {scratch_at_10:.4}"
    );
    let elapsed = start.elapsed();
    println!(
        "criterion 9 PASS — backbone name set matched exactly ({} params), branch+head fresh \
         ({} params); transfer reached the from-scratch epoch-10 accuracy {:.3} at epoch {} \
         (best-by-10 {:.3}) ({:.0}s)",
        report.matched.len(),
        report.skipped_model.len(),
        scratch_at_10,
        reached_at.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
        tl_best_by_10,
        elapsed.as_secs_f64()
    );
}

/// Criterion 10 — determinism. Two complete training runs of the binary
/// with identical seeds produce identical fold plans and loss traces equal
/// within 1e-6.
#[test]
fn c10_identical_seeds_reproduce_the_training_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = Command::new(BIN)
        .args([
            "synth",
            "--out",
            data.to_str().unwrap(),
            "--classes",
            "3",
            "--per-class",
            "5",
            "--size",
            "32",
            "--seed",
            "9",
        ])
        .output()
        .expect("binary spawns");
    assert!(out.status.success(), "synth failed: {}", String::from_utf8_lossy(&out.stderr));

    let cfg = TrainConfig {
        input_size: 32,
        width_divisor: 16,
        batch_size: 4,
        epochs: 3,
        folds: 1,
        clr_step_size: 8,
        seed: 5,
        ..TrainConfig::default()
    };
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, cfg.to_json_pretty()).unwrap();

    let run = |name: &str| {
        let bundle = dir.path().join(name);
        let out = Command::new(BIN)
            .args([
                "train",
                "--data",
                data.to_str().unwrap(),
                "--config",
                cfg_path.to_str().unwrap(),
                "--out",
                bundle.to_str().unwrap(),
            ])
            .env_remove("NEMAKIT_SEED")
            .output()
            .expect("binary spawns");
        assert!(out.status.success(), "train failed: {}", String::from_utf8_lossy(&out.stderr));
        bundle
    };
    let first = run("run1");
    let second = run("run2");

    let plan1 = std::fs::read_to_string(first.join("fold_plan.json")).unwrap();
    let plan2 = std::fs::read_to_string(second.join("fold_plan.json")).unwrap();
    assert_eq!(plan1, plan2, "fold plans differ between identically seeded runs");

    let losses = |bundle: &std::path::Path| -> Vec<(f64, f64)> {
        std::fs::read_to_string(bundle.join("fold_0/history.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| {
                let cols: Vec<&str> = line.split(',').collect();
                (cols[1].parse().unwrap(), cols[3].parse().unwrap())
            })
            .collect()
    };
    let trace1 = losses(&first);
    let trace2 = losses(&second);
    assert_eq!(trace1.len(), trace2.len());
    let mut worst = 0.0f64;
    for (epoch, ((tl1, vl1), (tl2, vl2))) in trace1.iter().zip(&trace2).enumerate() {
        assert!(
            (tl1 - tl2).abs() <= 1e-6 && (vl1 - vl2).abs() <= 1e-6,
            "epoch {epoch}: losses {tl1}/{vl1} vs {tl2}/{vl2} differ beyond 1e-6"
        );
        worst = worst.max((tl1 - tl2).abs()).max((vl1 - vl2).abs());
    }
    println!(
        "criterion 10 PASS — identical fold plans; {} epochs of loss traces agree \
         (largest difference {worst:.1e} <= 1e-6)",
        trace1.len()
    );
}
