//! Central finite-difference verification of backward rules.
//!
//! The checker runs a caller-supplied graph builder on a fresh tape, collects
//! the analytic input gradients, then re-evaluates the loss at elementwise
//! perturbations +/- h and compares (f(x+h) - f(x-h)) / 2h against the
//! analytic value. Differences are judged by relative error with an absolute
//! floor for near-zero gradient pairs.
//!
//! A single step size cannot serve every element: a large step suffers O(h^2)
//! truncation through high-curvature regions (batch norm's inverse deviation)
//! and can flip a max-pool winner or ReLU state mid-probe, while a small step
//! drowns the difference quotient in rounding noise at single precision.
//! Each element therefore probes a ladder of steps — one rung 4x above the
//! base step, the base step, then successively 4x-smaller rungs — and the
//! rung with the best agreement counts. A genuinely wrong backward rule
//! disagrees at every rung (see the corrupted control in the verification
//! suite), so the ladder does not mask real defects.

use crate::engine::scalar::Scalar;
use crate::engine::tape::{Tape, TensorId};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Base central-difference step.
    pub h: f64,
    /// Maximum accepted |a - n| / max(|a|, |n|).
    pub rel_tol: f64,
    /// If both gradients are within this of zero the element passes outright
    /// (the relative error of two noise-level values is meaningless).
    pub abs_tol: f64,
    /// Per-input cap on checked elements; elements are sampled at a
    /// deterministic stride when a tensor is larger than this.
    pub max_elements: usize,
    /// Number of 4x-smaller rungs below the base step on the ladder an
    /// element descends until some rung agrees (one 4x-larger rung is always
    /// tried as well); the element's best rung counts.
    pub h_retries: usize,
}

impl GradCheckConfig {
    /// Tolerances for 32-bit runs: relative 1e-2. The base step is near the
    /// f32 rounding/truncation optimum cbrt(machine epsilon) ~ 5e-3; a
    /// smaller step drowns the quotient in single-precision noise, so only
    /// marginal elements descend the ladder.
    pub fn f32_defaults() -> Self {
        GradCheckConfig { h: 4e-3, rel_tol: 1e-2, abs_tol: 2e-3, max_elements: 48, h_retries: 2 }
    }

    /// Tolerances for 64-bit verification runs: relative 1e-5, with a step
    /// small enough that O(h^2) truncation stays below the tolerance even
    /// through batch-norm's inverse-deviation curvature.
    pub fn f64_defaults() -> Self {
        GradCheckConfig { h: 1e-4, rel_tol: 1e-5, abs_tol: 1e-9, max_elements: 48, h_retries: 2 }
    }

    /// Defaults matching the scalar type in use.
    pub fn for_scalar<S: Scalar>() -> Self {
        if S::NAME == "f64" {
            Self::f64_defaults()
        } else {
            Self::f32_defaults()
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub passed: bool,
    pub max_rel_err: f64,
    pub checked_elements: usize,
    /// Input index / element index / analytic / numeric of the worst element.
    pub worst_input: usize,
    pub worst_element: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

impl GradCheckReport {
    pub fn describe(&self) -> String {
        format!(
            "{} (max rel err {:.3e} at input {} elem {}: analytic {:.6e} vs numeric {:.6e}, {} elements)",
            if self.passed { "pass" } else { "FAIL" },
            self.max_rel_err,
            self.worst_input,
            self.worst_element,
            self.worst_analytic,
            self.worst_numeric,
            self.checked_elements,
        )
    }
}

/// Indices checked for a tensor of `len` elements under an element cap.
fn sample_indices(len: usize, cap: usize) -> Vec<usize> {
    if len <= cap {
        return (0..len).collect();
    }
    let mut out = Vec::with_capacity(cap);
    for j in 0..cap {
        let idx = j * len / cap;
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    out
}

/// Checks the gradient of `build`'s scalar output w.r.t. every tensor in
/// `inputs`. `build` must construct the same graph every call — it is invoked
/// once for the analytic pass and twice per sampled element.
pub fn gradient_check<S, F>(
    inputs: &[Tensor<S>],
    cfg: &GradCheckConfig,
    mut build: F,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: FnMut(&mut Tape<S>, &[TensorId]) -> Result<TensorId>,
{
    let eval = |build: &mut F, tensors: &[Tensor<S>]| -> Result<(f64, Vec<Option<Vec<S>>>)> {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = tensors.iter().map(|t| tape.param(t.clone())).collect();
        let loss = build(&mut tape, &ids)?;
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "loss", name: "gradient_check".into() });
        }
        tape.backward(loss)?;
        let grads = ids.iter().map(|&id| tape.take_grad(id)).collect();
        Ok((value.to_f64(), grads))
    };

    let (_, analytic) = eval(&mut build, inputs)?;

    let mut report = GradCheckReport {
        passed: true,
        max_rel_err: 0.0,
        checked_elements: 0,
        worst_input: 0,
        worst_element: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };

    let mut work: Vec<Tensor<S>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let grad_i = analytic[i].as_deref();
        for &e in &sample_indices(input.len(), cfg.max_elements) {
            let orig = input.data()[e];
            let a = grad_i.map_or(0.0, |g| g[e].to_f64());
            report.checked_elements += 1;

            // Descend the step ladder until a rung agrees; keep the best.
            // The top rung sits above the base step because single-precision
            // rounding noise on the difference quotient scales as 1/h.
            let mut best_rel = f64::INFINITY;
            let mut best_numeric = 0.0;
            let mut element_passed = false;
            for rung in -1..=(cfg.h_retries as i32) {
                let h = cfg.h / 4f64.powi(rung);

                work[i].data_mut()[e] = orig + S::of(h);
                let mut tape = Tape::inference();
                let ids: Vec<TensorId> = work.iter().map(|t| tape.param(t.clone())).collect();
                let loss_id = build(&mut tape, &ids)?;
                let plus = tape.value(loss_id).data()[0].to_f64();

                work[i].data_mut()[e] = orig - S::of(h);
                let mut tape = Tape::inference();
                let ids: Vec<TensorId> = work.iter().map(|t| tape.param(t.clone())).collect();
                let loss_id = build(&mut tape, &ids)?;
                let minus = tape.value(loss_id).data()[0].to_f64();

                work[i].data_mut()[e] = orig;

                if !plus.is_finite() || !minus.is_finite() {
                    return Err(Error::NonFinite {
                        what: "perturbed loss",
                        name: "gradient_check".into(),
                    });
                }
                let numeric = (plus - minus) / (2.0 * h);
                let diff = (a - numeric).abs();
                if diff <= cfg.abs_tol {
                    element_passed = true;
                    break;
                }
                let rel = diff / a.abs().max(numeric.abs());
                if rel < best_rel {
                    best_rel = rel;
                    best_numeric = numeric;
                }
                if rel <= cfg.rel_tol {
                    element_passed = true;
                    break;
                }
            }
            if element_passed && best_rel > cfg.rel_tol {
                // Passed via the absolute floor; nothing to record.
                continue;
            }

            if best_rel > report.max_rel_err {
                report.max_rel_err = best_rel;
                report.worst_input = i;
                report.worst_element = e;
                report.worst_analytic = a;
                report.worst_numeric = best_numeric;
            }
            if !element_passed {
                report.passed = false;
            }
        }
    }
    Ok(report)
}
