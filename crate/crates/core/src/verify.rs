//! Gradient-verification suites.
//!
//! Three scopes share one harness: `ops` checks every differentiable tape
//! operation on several random shapes, `blocks` checks the composite layer
//! patterns the architectures are built from, and `model` spot-checks
//! end-to-end gradients of a width-reduced NemaNet. A deliberately corrupted
//! control demonstrates that the harness actually rejects wrong gradients.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    gradient_check, GradCheckConfig, Scalar, Tape, Tensor, TensorId, BN_EPSILON, BN_MOMENTUM,
};
use crate::error::Result;
use crate::model::{build_nemanet, InceptionWidths};

/// One verification row: a named configuration and its outcome.
#[derive(Clone, Debug)]
pub struct CheckRow {
    pub name: String,
    pub max_rel_err: f64,
    pub rel_tol: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckRow {
    fn from_report(name: String, cfg: &GradCheckConfig, report: crate::engine::GradCheckReport) -> Self {
        CheckRow {
            name,
            max_rel_err: report.max_rel_err,
            rel_tol: cfg.rel_tol,
            passed: report.passed,
            detail: report.describe(),
        }
    }

    fn error(name: String, cfg: &GradCheckConfig, err: crate::error::Error) -> Self {
        CheckRow {
            name,
            max_rel_err: f64::INFINITY,
            rel_tol: cfg.rel_tol,
            passed: false,
            detail: format!("harness error: {err}"),
        }
    }
}

/// Uniform values in ±[lo, hi]: bounded away from zero so kinked functions
/// (ReLU, max pooling) keep their finite-difference step on one side.
fn rand_tensor<S: Scalar>(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let len: usize = shape.iter().product();
    let data: Vec<S> = (0..len)
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            S::of(sign * rng.gen_range(lo..hi))
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape/data agree")
}

fn rand_positive<S: Scalar>(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let len: usize = shape.iter().product();
    let data: Vec<S> = (0..len).map(|_| S::of(rng.gen_range(lo..hi))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape/data agree")
}

/// Values with pairwise separation well above the probe step, for max
/// pooling: a step that closes the gap between a window's top two values
/// would silently change the routing mid-probe.
fn rand_separated<S: Scalar>(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<S> {
    use rand::seq::SliceRandom;
    let len: usize = shape.iter().product();
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    let data: Vec<S> = order
        .into_iter()
        .map(|k| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            S::of(sign * (0.1 + 1.9 * k as f64 / len as f64))
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape/data agree")
}

/// Reduce any tensor to a scalar with fixed random weights so every element
/// influences the loss.
fn reduce<S: Scalar>(
    tape: &mut Tape<S>,
    x: TensorId,
    rng: &mut ChaCha8Rng,
) -> Result<TensorId> {
    let n = tape.value(x).len();
    let weights: Vec<S> = (0..n).map(|_| S::of(rng.gen_range(-1.0..1.0))).collect();
    tape.weighted_sum(x, weights)
}

fn run_check<S, F>(
    rows: &mut Vec<CheckRow>,
    cfg: &GradCheckConfig,
    name: String,
    inputs: &[Tensor<S>],
    build: F,
) where
    S: Scalar,
    F: FnMut(&mut Tape<S>, &[TensorId]) -> Result<TensorId>,
{
    match gradient_check(inputs, cfg, build) {
        Ok(report) => rows.push(CheckRow::from_report(name, cfg, report)),
        Err(err) => rows.push(CheckRow::error(name, cfg, err)),
    }
}

/// Check every tape operation on at least three random shapes each.
pub fn check_ops<S: Scalar>(seed: u64) -> Vec<CheckRow> {
    let cfg = GradCheckConfig::for_scalar::<S>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    // relu: elementwise, inputs bounded away from the kink.
    for shape in [vec![2, 3, 5, 4], vec![7], vec![3, 9]] {
        let x = rand_tensor::<S>(&shape, 0.05, 1.0, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(&mut rows, &cfg, format!("relu {shape:?}"), &[x], |tape, ids| {
            let y = tape.relu(ids[0])?;
            reduce(tape, y, &mut wrng.clone())
        });
    }

    // linear: x (n,f) @ w (f,k) + b.
    for (n, f, k) in [(2usize, 5usize, 3usize), (1, 7, 2), (4, 3, 6)] {
        let x = rand_tensor::<S>(&[n, f], 0.1, 1.0, &mut rng);
        let w = rand_tensor::<S>(&[f, k], 0.1, 1.0, &mut rng);
        let b = rand_tensor::<S>(&[k], 0.1, 1.0, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(&mut rows, &cfg, format!("linear {n}x{f}->{k}"), &[x, w, b], move |tape, ids| {
            let y = tape.linear(ids[0], ids[1], ids[2])?;
            reduce(tape, y, &mut wrng.clone())
        });
    }

    // conv2d: square, asymmetric, and strided kernels; one run with bias.
    let conv_cases: [(&str, Vec<usize>, Vec<usize>, usize, (usize, usize), bool); 4] = [
        ("conv2d 3x3 p1", vec![2, 3, 6, 6], vec![4, 3, 3, 3], 1, (1, 1), false),
        ("conv2d 1x7 p(0,3)", vec![1, 2, 5, 9], vec![3, 2, 1, 7], 1, (0, 3), false),
        ("conv2d 7x1 s1 p(3,0)", vec![1, 2, 9, 5], vec![3, 2, 7, 1], 1, (3, 0), true),
        ("conv2d 3x3 s2 p1", vec![2, 2, 7, 7], vec![3, 2, 3, 3], 2, (1, 1), true),
    ];
    for (name, xs, ws, stride, pad, with_bias) in conv_cases {
        let x = rand_tensor::<S>(&xs, 0.1, 1.0, &mut rng);
        let w = rand_tensor::<S>(&ws, 0.1, 0.8, &mut rng);
        let mut inputs = vec![x, w];
        if with_bias {
            inputs.push(rand_tensor::<S>(&[ws[0]], 0.1, 0.5, &mut rng));
        }
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(&mut rows, &cfg, name.to_string(), &inputs, move |tape, ids| {
            let b = if with_bias { Some(ids[2]) } else { None };
            let y = tape.conv2d(ids[0], ids[1], b, stride, pad)?;
            reduce(tape, y, &mut wrng.clone())
        });
    }

    // batch_norm in training mode (the differentiable path).
    for shape in [vec![2, 3, 4, 4], vec![3, 2, 3, 5], vec![1, 4, 3, 3]] {
        let c = shape[1];
        let x = rand_tensor::<S>(&shape, 0.1, 1.0, &mut rng);
        let gamma = rand_positive::<S>(&[c], 0.5, 1.5, &mut rng);
        let beta = rand_tensor::<S>(&[c], 0.0, 0.3, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("batch_norm {shape:?}"),
            &[x, gamma, beta],
            move |tape, ids| {
                let c = tape.value(ids[1]).len();
                let mut rm = vec![S::zero(); c];
                let mut rv = vec![S::one(); c];
                let y = tape.batch_norm(
                    ids[0],
                    ids[1],
                    ids[2],
                    &mut rm,
                    &mut rv,
                    true,
                    S::of(BN_MOMENTUM),
                    S::of(BN_EPSILON),
                )?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
    }

    // Pooling. Max pooling is checked on well-separated values so the step
    // cannot flip a window winner.
    for (window, stride, pad, shape) in
        [(3usize, 2usize, 1usize, vec![2, 2, 6, 6]), (2, 2, 0, vec![1, 3, 6, 6]), (3, 1, 1, vec![1, 2, 5, 5])]
    {
        let x = rand_separated::<S>(&shape, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("max_pool2d w{window} s{stride} p{pad} {shape:?}"),
            &[x],
            move |tape, ids| {
                let y = tape.max_pool2d(ids[0], window, stride, pad)?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
        let x = rand_tensor::<S>(&shape, 0.05, 1.0, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("avg_pool2d w{window} s{stride} p{pad} {shape:?}"),
            &[x],
            move |tape, ids| {
                let y = tape.avg_pool2d(ids[0], window, stride, pad)?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
    }

    for shape in [vec![2, 5, 4, 6], vec![1, 3, 2, 2], vec![3, 1, 5, 5]] {
        let x = rand_tensor::<S>(&shape, 0.1, 1.0, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(&mut rows, &cfg, format!("global_avg_pool {shape:?}"), &[x], move |tape, ids| {
            let y = tape.global_avg_pool(ids[0])?;
            reduce(tape, y, &mut wrng.clone())
        });
    }

    // Channel concatenation of 2 and 3 inputs.
    for parts in [vec![2usize, 3], vec![1, 2, 4], vec![3, 3]] {
        let inputs: Vec<Tensor<S>> = parts
            .iter()
            .map(|&c| rand_tensor::<S>(&[2, c, 3, 4], 0.1, 1.0, &mut rng))
            .collect();
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("concat_channels {parts:?}"),
            &inputs,
            move |tape, ids| {
                let y = tape.concat_channels(ids)?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
    }

    // Softmax cross-entropy is already scalar-valued.
    for (n, k) in [(4usize, 5usize), (2, 3), (7, 2)] {
        let logits = rand_tensor::<S>(&[n, k], 0.1, 2.0, &mut rng);
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        run_check(
            &mut rows,
            &cfg,
            format!("softmax_cross_entropy {n}x{k}"),
            &[logits],
            move |tape, ids| tape.softmax_cross_entropy(ids[0], &labels),
        );
    }

    // weighted_sum with fixed weights.
    for shape in [vec![6], vec![2, 3, 2, 2], vec![5, 4]] {
        let x = rand_tensor::<S>(&shape, 0.1, 1.0, &mut rng);
        let len: usize = shape.iter().product();
        let weights: Vec<S> = (0..len).map(|_| S::of(rng.gen_range(-1.0..1.0))).collect();
        run_check(&mut rows, &cfg, format!("weighted_sum {shape:?}"), &[x], move |tape, ids| {
            tape.weighted_sum(ids[0], weights.clone())
        });
    }

    rows
}

/// Check composite layer patterns: the dense conv block, transition layer,
/// stem, the three inception patterns, the strided reduction, and the pooled
/// classification head.
pub fn check_blocks<S: Scalar>(seed: u64) -> Vec<CheckRow> {
    let cfg = GradCheckConfig::for_scalar::<S>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    // Helper: BN (training) with fresh running buffers.
    fn bn<S: Scalar>(
        tape: &mut Tape<S>,
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
    ) -> Result<TensorId> {
        let c = tape.value(gamma).len();
        let mut rm = vec![S::zero(); c];
        let mut rv = vec![S::one(); c];
        tape.batch_norm(x, gamma, beta, &mut rm, &mut rv, true, S::of(BN_MOMENTUM), S::of(BN_EPSILON))
    }

    // BN parameters for block compositions are drawn so the normalized
    // activations stay strictly positive: a finite-difference probe through
    // BN shifts the whole batch's statistics, and any ReLU sitting exactly
    // on its kink would turn that shift into a spurious gradient mismatch.
    // The ReLU kink itself is exercised by the op-scope checks.
    let gamma_range = (0.2, 0.5);
    let beta_range = (1.9, 2.3);

    for trial in 0..3u64 {
        let (cin, growth, bottleneck) = [(3usize, 2usize, 4usize), (2, 3, 6), (4, 2, 8)][trial as usize];
        let x = rand_tensor::<S>(&[1, cin, 6, 6], 0.1, 1.0, &mut rng);
        let g1 = rand_positive::<S>(&[cin], gamma_range.0, gamma_range.1, &mut rng);
        let b1 = rand_positive::<S>(&[cin], beta_range.0, beta_range.1, &mut rng);
        let w1 = rand_tensor::<S>(&[bottleneck, cin, 1, 1], 0.1, 0.6, &mut rng);
        let g2 = rand_positive::<S>(&[bottleneck], gamma_range.0, gamma_range.1, &mut rng);
        let b2 = rand_positive::<S>(&[bottleneck], beta_range.0, beta_range.1, &mut rng);
        let w2 = rand_tensor::<S>(&[growth, bottleneck, 3, 3], 0.1, 0.6, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("dense conv block #{trial} (BN-ReLU-1x1, BN-ReLU-3x3, concat)"),
            &[x, g1, b1, w1, g2, b2, w2],
            move |tape, ids| {
                let h = bn(tape, ids[0], ids[1], ids[2])?;
                let h = tape.relu(h)?;
                let h = tape.conv2d(h, ids[3], None, 1, (0, 0))?;
                let h = bn(tape, h, ids[4], ids[5])?;
                let h = tape.relu(h)?;
                let h = tape.conv2d(h, ids[6], None, 1, (1, 1))?;
                let y = tape.concat_channels(&[ids[0], h])?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
    }

    for trial in 0..3u64 {
        let (cin, cout) = [(4usize, 2usize), (6, 3), (2, 1)][trial as usize];
        let x = rand_tensor::<S>(&[1, cin, 6, 6], 0.1, 1.0, &mut rng);
        let g = rand_positive::<S>(&[cin], gamma_range.0, gamma_range.1, &mut rng);
        let b = rand_positive::<S>(&[cin], beta_range.0, beta_range.1, &mut rng);
        let w = rand_tensor::<S>(&[cout, cin, 1, 1], 0.1, 0.6, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("transition #{trial} (BN-ReLU-1x1-avgpool)"),
            &[x, g, b, w],
            move |tape, ids| {
                let h = bn(tape, ids[0], ids[1], ids[2])?;
                let h = tape.relu(h)?;
                let h = tape.conv2d(h, ids[3], None, 1, (0, 0))?;
                let y = tape.avg_pool2d(h, 2, 2, 0)?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
    }

    for trial in 0..3u64 {
        let cout = [2usize, 3, 4][trial as usize];
        let x = rand_tensor::<S>(&[1, 3, 13, 13], 0.1, 1.0, &mut rng);
        let w = rand_tensor::<S>(&[cout, 3, 7, 7], 0.05, 0.4, &mut rng);
        let g = rand_positive::<S>(&[cout], gamma_range.0, gamma_range.1, &mut rng);
        let b = rand_positive::<S>(&[cout], beta_range.0, beta_range.1, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("stem #{trial} (7x7 s2, BN, ReLU, maxpool)"),
            &[x, w, g, b],
            move |tape, ids| {
                let h = tape.conv2d(ids[0], ids[1], None, 2, (3, 3))?;
                let h = bn(tape, h, ids[2], ids[3])?;
                let h = tape.relu(h)?;
                let y = tape.max_pool2d(h, 3, 2, 1)?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
    }

    // Inception A: 1x1 / 1x1-3x3 / 1x1-3x3-3x3 / pool-1x1, concatenated.
    for trial in 0..3u64 {
        let cin = [3usize, 4, 2][trial as usize];
        let x = rand_tensor::<S>(&[1, cin, 6, 6], 0.1, 1.0, &mut rng);
        let w1 = rand_tensor::<S>(&[2, cin, 1, 1], 0.1, 0.6, &mut rng);
        let w2a = rand_tensor::<S>(&[2, cin, 1, 1], 0.1, 0.6, &mut rng);
        let w2b = rand_tensor::<S>(&[2, 2, 3, 3], 0.1, 0.6, &mut rng);
        let w3a = rand_tensor::<S>(&[2, cin, 1, 1], 0.1, 0.6, &mut rng);
        let w3b = rand_tensor::<S>(&[3, 2, 3, 3], 0.1, 0.6, &mut rng);
        let w3c = rand_tensor::<S>(&[3, 3, 3, 3], 0.1, 0.6, &mut rng);
        let w4 = rand_tensor::<S>(&[2, cin, 1, 1], 0.1, 0.6, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("inception A #{trial} (four branches, concat)"),
            &[x, w1, w2a, w2b, w3a, w3b, w3c, w4],
            move |tape, ids| {
                let b1 = tape.conv2d(ids[0], ids[1], None, 1, (0, 0))?;
                let b2 = tape.conv2d(ids[0], ids[2], None, 1, (0, 0))?;
                let b2 = tape.conv2d(b2, ids[3], None, 1, (1, 1))?;
                let b3 = tape.conv2d(ids[0], ids[4], None, 1, (0, 0))?;
                let b3 = tape.conv2d(b3, ids[5], None, 1, (1, 1))?;
                let b3 = tape.conv2d(b3, ids[6], None, 1, (1, 1))?;
                let b4 = tape.avg_pool2d(ids[0], 3, 1, 1)?;
                let b4 = tape.conv2d(b4, ids[7], None, 1, (0, 0))?;
                let y = tape.concat_channels(&[b1, b2, b3, b4])?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
    }

    // Inception B: factorized 1x7 / 7x1 chains.
    for trial in 0..3u64 {
        let cin = [3usize, 2, 4][trial as usize];
        let x = rand_tensor::<S>(&[1, cin, 8, 8], 0.1, 1.0, &mut rng);
        let wr = rand_tensor::<S>(&[2, cin, 1, 1], 0.1, 0.6, &mut rng);
        let wh = rand_tensor::<S>(&[2, 2, 1, 7], 0.1, 0.5, &mut rng);
        let wv = rand_tensor::<S>(&[3, 2, 7, 1], 0.1, 0.5, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("inception B #{trial} (1x1, 1x7, 7x1 chain)"),
            &[x, wr, wh, wv],
            move |tape, ids| {
                let h = tape.conv2d(ids[0], ids[1], None, 1, (0, 0))?;
                let h = tape.conv2d(h, ids[2], None, 1, (0, 3))?;
                let h = tape.conv2d(h, ids[3], None, 1, (3, 0))?;
                reduce(tape, h, &mut wrng.clone())
            },
        );
    }

    // Inception C: a split into parallel 1x3 and 3x1 halves, concatenated.
    for trial in 0..3u64 {
        let cin = [3usize, 4, 2][trial as usize];
        let x = rand_tensor::<S>(&[1, cin, 5, 5], 0.1, 1.0, &mut rng);
        let wr = rand_tensor::<S>(&[3, cin, 1, 1], 0.1, 0.6, &mut rng);
        let wa = rand_tensor::<S>(&[2, 3, 1, 3], 0.1, 0.6, &mut rng);
        let wb = rand_tensor::<S>(&[2, 3, 3, 1], 0.1, 0.6, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("inception C #{trial} (1x1 then 1x3 | 3x1 split)"),
            &[x, wr, wa, wb],
            move |tape, ids| {
                let h = tape.conv2d(ids[0], ids[1], None, 1, (0, 0))?;
                let a = tape.conv2d(h, ids[2], None, 1, (0, 1))?;
                let b = tape.conv2d(h, ids[3], None, 1, (1, 0))?;
                let y = tape.concat_channels(&[a, b])?;
                reduce(tape, y, &mut wrng.clone())
            },
        );
    }

    // Reduction: 1x1 then strided 3x3.
    for trial in 0..3u64 {
        let cin = [4usize, 3, 2][trial as usize];
        let x = rand_tensor::<S>(&[1, cin, 7, 7], 0.1, 1.0, &mut rng);
        let wr = rand_tensor::<S>(&[2, cin, 1, 1], 0.1, 0.6, &mut rng);
        let ws = rand_tensor::<S>(&[3, 2, 3, 3], 0.1, 0.6, &mut rng);
        let wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        run_check(
            &mut rows,
            &cfg,
            format!("reduction #{trial} (1x1, 3x3 s2)"),
            &[x, wr, ws],
            move |tape, ids| {
                let h = tape.conv2d(ids[0], ids[1], None, 1, (0, 0))?;
                let h = tape.conv2d(h, ids[2], None, 2, (1, 1))?;
                reduce(tape, h, &mut wrng.clone())
            },
        );
    }

    // Head: GAP, linear, cross-entropy.
    for trial in 0..3u64 {
        let (n, c, k) = [(2usize, 4usize, 3usize), (3, 2, 5), (1, 6, 2)][trial as usize];
        let x = rand_tensor::<S>(&[n, c, 4, 4], 0.1, 1.0, &mut rng);
        let w = rand_tensor::<S>(&[c, k], 0.1, 0.7, &mut rng);
        let b = rand_tensor::<S>(&[k], 0.0, 0.3, &mut rng);
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        run_check(
            &mut rows,
            &cfg,
            format!("head #{trial} (GAP, linear, cross-entropy)"),
            &[x, w, b],
            move |tape, ids| {
                let h = tape.global_avg_pool(ids[0])?;
                let h = tape.linear(h, ids[1], ids[2])?;
                tape.softmax_cross_entropy(h, &labels)
            },
        );
    }

    rows
}

/// Spot-check end-to-end gradients of a width-reduced NemaNet at 32px: a
/// representative subset of parameters spanning the stem, both branches,
/// the fusion, and the head.
pub fn check_model<S: Scalar>(seed: u64) -> Vec<CheckRow> {
    let cfg = GradCheckConfig::for_scalar::<S>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    let mut model: crate::model::Model<S> =
        match build_nemanet(3, 8, &InceptionWidths::default(), 32, seed) {
            Ok(m) => m,
            Err(err) => {
                rows.push(CheckRow::error("model build".into(), &cfg, err));
                return rows;
            }
        };
    // The head is zero-initialized by construction; without weights there is
    // no gradient flow to check, so randomize every parameter slightly.
    for id in model.trainable_param_ids() {
        let param = model.params_mut().get_mut(id);
        for v in param.value.data_mut() {
            *v = *v + S::of(rng.gen_range(0.01..0.08));
        }
    }

    let selected = [
        "features.conv0.weight",
        "features.denseblock1.denselayer1.conv1.weight",
        "features.denseblock3.denselayer12.conv2.weight",
        "features.norm5.weight",
        "features.transition2.conv.weight",
        "inception.a.b2.2.conv.weight",
        "inception.b.b3.3.conv.weight",
        "inception.c.b2.2a.conv.weight",
        "inception.r3.2.conv.weight",
        "head.weight",
        "head.bias",
    ];
    let trainable = model.trainable_param_ids();
    let name_of = |pid| model.params().get(pid).name.clone();
    let selected_pids: Vec<usize> = trainable
        .iter()
        .copied()
        .filter(|&pid| selected.contains(&name_of(pid).as_str()))
        .collect();
    if selected_pids.len() != selected.len() {
        let found: Vec<String> = selected_pids.iter().map(|&p| name_of(p)).collect();
        rows.push(CheckRow {
            name: "model parameter selection".into(),
            max_rel_err: f64::INFINITY,
            rel_tol: cfg.rel_tol,
            passed: false,
            detail: format!("expected {} named parameters, found {found:?}", selected.len()),
        });
        return rows;
    }

    let x = rand_tensor::<S>(&[2, 3, 32, 32], 0.05, 0.9, &mut rng);
    let labels = vec![0usize, 1];
    for &pid in &selected_pids {
        let name = name_of(pid);
        let value = model.params().get(pid).value.clone();
        let (model_ref, trainable_ref, x_ref, labels_ref) = (&model, &trainable, &x, &labels);
        run_check(
            &mut rows,
            &cfg,
            format!("nemanet/32 grad of {name}"),
            &[value],
            move |tape, ids| {
                let all: Vec<TensorId> = trainable_ref
                    .iter()
                    .map(|&p| {
                        if p == pid {
                            ids[0]
                        } else {
                            tape.leaf(model_ref.params().get(p).value.clone())
                        }
                    })
                    .collect();
                let logits = model_ref.forward_with_params(tape, x_ref, &all, true)?;
                tape.softmax_cross_entropy(logits, labels_ref)
            },
        );
    }
    rows
}

/// Negative control: the forward pass the finite-difference probe sees is
/// deliberately doubled relative to the pass that produced the analytic
/// gradients, emulating a backward rule that is wrong by a factor of two.
/// A healthy harness must fail this row.
pub fn corrupted_control<S: Scalar>(seed: u64) -> Vec<CheckRow> {
    let cfg = GradCheckConfig::for_scalar::<S>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rand_tensor::<S>(&[3, 4], 0.2, 1.0, &mut rng);
    let weights: Vec<S> = (0..12).map(|_| S::of(rng.gen_range(0.5..1.0))).collect();
    let mut calls = 0usize;
    let mut rows = Vec::new();
    run_check(
        &mut rows,
        &cfg,
        "corrupted backward (control, expected to fail)".into(),
        &[x],
        move |tape, ids| {
            calls += 1;
            let scale = if calls == 1 { S::one() } else { S::of(2.0) };
            let scaled: Vec<S> = weights.iter().map(|&w| w * scale).collect();
            tape.weighted_sum(ids[0], scaled)
        },
    );
    rows
}
