//! Independent oracles for the training protocol pieces: the cyclic
//! learning-rate waveform, the weight-decay interpolation, the augmentation
//! group, and the momentum update.

use nemakit::train::{
    apply_augment, draw_augment, sgd_update, weight_decay_for_epoch, AugmentDraw, ClrSchedule,
};
use nemakit::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tabulated triangular waveform: piecewise-linear by explicit branch, not
/// the modular fold the implementation uses.
fn oracle_triangle(lr_min: f64, lr_max: f64, step: usize, i: usize) -> f64 {
    let cycle = 2 * step;
    let pos = i % cycle;
    let frac = if pos <= step {
        pos as f64 / step as f64
    } else {
        (cycle - pos) as f64 / step as f64
    };
    lr_min + (lr_max - lr_min) * frac
}

#[test]
fn clr_matches_tabulated_waveform_exactly() {
    let (lr_min, lr_max, step) = (6e-5, 1e-3, 100usize);
    let schedule = ClrSchedule::new(lr_min, lr_max, step).unwrap();
    let n = 4 * 2 * step; // four full cycles
    let trace = schedule.trace(n);
    assert_eq!(trace.len(), n);
    for (i, &lr) in trace.iter().enumerate() {
        let expected = oracle_triangle(lr_min, lr_max, step, i);
        assert_eq!(lr, expected, "iteration {i}");
    }
    // Anchors: floor at cycle boundaries, peak at odd multiples of step.
    assert_eq!(trace[0], lr_min);
    assert_eq!(trace[step], lr_max);
    assert_eq!(trace[2 * step], lr_min);
    assert_eq!(trace[3 * step], lr_max);
    // Bounds everywhere.
    assert!(trace.iter().all(|&lr| (lr_min..=lr_max).contains(&lr)));
}

#[test]
fn clr_decay_scales_peaks_linearly_to_final() {
    let (lr_min, lr_max, step, final_lr) = (6e-5, 1e-3, 50usize, 6e-6);
    let total = 8 * step;
    let schedule = ClrSchedule::new(lr_min, lr_max, step).unwrap().with_decay(final_lr, total).unwrap();
    let trace = schedule.trace(total);
    // The envelope is 1 at iteration 0 and final_lr/lr_max at the last
    // iteration; every point is the undecayed waveform times the envelope.
    for (i, &lr) in trace.iter().enumerate() {
        let envelope = 1.0 + (final_lr / lr_max - 1.0) * (i as f64 / (total - 1) as f64);
        let expected = envelope * oracle_triangle(lr_min, lr_max, step, i);
        assert!((lr - expected).abs() <= f64::EPSILON * expected.abs(), "iteration {i}");
    }
    // Peaks shrink monotonically.
    let peaks: Vec<f64> = (0..4).map(|c| trace[step + 2 * step * c]).collect();
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "peaks not decaying: {peaks:?}");
}

#[test]
fn weight_decay_interpolates_endpoints() {
    assert_eq!(weight_decay_for_epoch(1e-5, 1e-6, 0, 100), 1e-5);
    assert_eq!(weight_decay_for_epoch(1e-5, 1e-6, 99, 100), 1e-6);
    assert_eq!(weight_decay_for_epoch(1e-5, 1e-6, 0, 1), 1e-5);
    let mid = weight_decay_for_epoch(1e-5, 1e-6, 50, 101);
    assert!((mid - 5.5e-6).abs() < 1e-18);
    // Monotone between the endpoints.
    let values: Vec<f64> = (0..100).map(|e| weight_decay_for_epoch(1e-5, 1e-6, e, 100)).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
}

fn square(values: &[f64]) -> Tensor<f64> {
    let side = (values.len() as f64).sqrt() as usize;
    assert_eq!(side * side, values.len());
    Tensor::new(vec![1, side, side], values.to_vec()).unwrap()
}

#[test]
fn augment_group_identities_hold() {
    let x = square(&(0..25).map(|v| v as f64).collect::<Vec<_>>());

    // Mirror and flip are involutions; four quarter turns are the identity.
    let mirror = AugmentDraw { mirror: true, flip: false, quarter_turns: 0 };
    let flip = AugmentDraw { mirror: false, flip: true, quarter_turns: 0 };
    let turn = AugmentDraw { mirror: false, flip: false, quarter_turns: 1 };

    let mm = apply_augment(&apply_augment(&x, mirror).unwrap(), mirror).unwrap();
    assert_eq!(mm.data(), x.data());
    let ff = apply_augment(&apply_augment(&x, flip).unwrap(), flip).unwrap();
    assert_eq!(ff.data(), x.data());
    let mut r = x.clone();
    for _ in 0..4 {
        r = apply_augment(&r, turn).unwrap();
    }
    assert_eq!(r.data(), x.data());

    // Two quarter turns equal mirror + flip (point reflection).
    let two_turns = apply_augment(
        &x,
        AugmentDraw { mirror: false, flip: false, quarter_turns: 2 },
    )
    .unwrap();
    let point = apply_augment(&apply_augment(&x, mirror).unwrap(), flip).unwrap();
    assert_eq!(two_turns.data(), point.data());

    // The identity draw is bitwise identity.
    let id = apply_augment(&x, AugmentDraw::IDENTITY).unwrap();
    assert_eq!(id.data(), x.data());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn augment_permutes_values(
        values in prop::collection::vec(-10.0f64..10.0, 16),
        mirror in any::<bool>(),
        flip in any::<bool>(),
        quarter_turns in 0u8..4,
    ) {
        let x = square(&values);
        let draw = AugmentDraw { mirror, flip, quarter_turns };
        let y = apply_augment(&x, draw).unwrap();
        prop_assert_eq!(y.shape(), x.shape());
        let mut a = x.data().to_vec();
        let mut b = y.data().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn momentum_update_matches_scalar_recurrence(
        theta0 in -2.0f64..2.0,
        grads in prop::collection::vec(-1.0f64..1.0, 1..12),
        lr in 1e-4f64..1e-1,
        momentum in 0.0f64..0.99,
        wd in 0.0f64..1e-2,
    ) {
        // Library update over a 1-element buffer vs a hand recurrence.
        let mut theta = [theta0];
        let mut velocity = [0.0f64];
        let (mut t_ref, mut v_ref) = (theta0, 0.0f64);
        for &g in &grads {
            sgd_update(&mut theta, &[g], &mut velocity, lr, momentum, wd);
            v_ref = momentum * v_ref - lr * (g + wd * t_ref);
            t_ref += v_ref;
            prop_assert_eq!(theta[0], t_ref);
            prop_assert_eq!(velocity[0], v_ref);
        }
    }
}

#[test]
fn draw_augment_honors_toggles_and_reaches_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let d = draw_augment(&mut rng, false, false, false);
        assert!(d.is_identity());
    }
    let mut seen_mirror = false;
    let mut seen_flip = false;
    let mut turns = [false; 4];
    for _ in 0..400 {
        let d = draw_augment(&mut rng, true, true, true);
        seen_mirror |= d.mirror;
        seen_flip |= d.flip;
        turns[d.quarter_turns as usize] = true;
    }
    assert!(seen_mirror && seen_flip && turns.iter().all(|&t| t));
}
