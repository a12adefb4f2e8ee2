//! Batch normalization.
//!
//! Training mode standardizes by per-channel batch statistics (biased
//! variance) and folds them into the running estimates with an exponential
//! moving average `running <- (1 - momentum) * running + momentum * batch`.
//! Eval mode standardizes by the running estimates. Both modes save the
//! normalized input for the backward rule.

use crate::engine::scalar::Scalar;
use crate::engine::tape::{grad_buf, Node, Op, Tape, TensorId};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

/// Default epsilon added to the variance before the square root.
pub const BN_EPSILON: f64 = 1e-5;
/// Default EMA momentum for the running statistics.
pub const BN_MOMENTUM: f64 = 0.1;

impl<S: Scalar> Tape<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        running_mean: &mut [S],
        running_var: &mut [S],
        training: bool,
        momentum: S,
        eps: S,
    ) -> Result<TensorId> {
        let (n, c, h, w) = self.value(x).dim4("batch_norm")?;
        for (name, len) in [
            ("gamma", self.value(gamma).len()),
            ("beta", self.value(beta).len()),
            ("running_mean", running_mean.len()),
            ("running_var", running_var.len()),
        ] {
            if len != c {
                return Err(Error::shape(
                    "batch_norm",
                    format!("{name} has {len} elements, input has {c} channels"),
                ));
            }
        }
        if eps <= S::zero() {
            return Err(Error::invalid("batch_norm", "epsilon must be > 0"));
        }
        let hw = h * w;
        let m = n * hw;
        let xv = self.value(x).data();
        let gv = self.value(gamma).data().to_vec();
        let bv = self.value(beta).data().to_vec();

        // Per-channel mean/variance of whichever statistics the mode uses.
        let mut mean = vec![S::zero(); c];
        let mut var = vec![S::zero(); c];
        if training {
            let inv_m = S::one() / S::of(m as f64);
            for ch in 0..c {
                let mut sum = S::zero();
                for i in 0..n {
                    let plane = &xv[(i * c + ch) * hw..(i * c + ch + 1) * hw];
                    for &v in plane {
                        sum += v;
                    }
                }
                let mu = sum * inv_m;
                let mut acc = S::zero();
                for i in 0..n {
                    let plane = &xv[(i * c + ch) * hw..(i * c + ch + 1) * hw];
                    for &v in plane {
                        let d = v - mu;
                        acc += d * d;
                    }
                }
                mean[ch] = mu;
                var[ch] = acc * inv_m;
            }
            let keep = S::one() - momentum;
            for ch in 0..c {
                running_mean[ch] = keep * running_mean[ch] + momentum * mean[ch];
                running_var[ch] = keep * running_var[ch] + momentum * var[ch];
            }
        } else {
            mean.copy_from_slice(running_mean);
            var.copy_from_slice(running_var);
        }

        let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
        let track = !self.is_inference();
        let mut out = vec![S::zero(); xv.len()];
        let mut xhat = if track { vec![S::zero(); xv.len()] } else { Vec::new() };
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * hw;
                let (mu, isd, ga, be) = (mean[ch], inv_std[ch], gv[ch], bv[ch]);
                if track {
                    for j in base..base + hw {
                        let xh = (xv[j] - mu) * isd;
                        xhat[j] = xh;
                        out[j] = ga * xh + be;
                    }
                } else {
                    for j in base..base + hw {
                        out[j] = ga * (xv[j] - mu) * isd + be;
                    }
                }
            }
        }
        let value = Tensor::new(vec![n, c, h, w], out)?;
        let needs = self.needs(&[x, gamma, beta]);
        Ok(self.push_op(value, Op::BatchNorm { x, gamma, beta, xhat, inv_std, training }, needs))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_batch_norm<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    x: TensorId,
    gamma: TensorId,
    beta: TensorId,
    xhat: &[S],
    inv_std: &[S],
    training: bool,
    g: &[S],
) {
    let (n, c, h, w) = nodes[x].value.dim4("batch_norm").expect("revalidated");
    let hw = h * w;
    let m = S::of((n * hw) as f64);
    let gv = nodes[gamma].value.data();

    // Per-channel reductions shared by every gradient.
    let mut sum_g = vec![S::zero(); c];
    let mut sum_g_xhat = vec![S::zero(); c];
    for i in 0..n {
        for ch in 0..c {
            let base = (i * c + ch) * hw;
            let mut s = S::zero();
            let mut sx = S::zero();
            for j in base..base + hw {
                s += g[j];
                sx += g[j] * xhat[j];
            }
            sum_g[ch] += s;
            sum_g_xhat[ch] += sx;
        }
    }

    if nodes[beta].needs_grad {
        let db = grad_buf(nodes, grads, beta);
        for (d, &s) in db.iter_mut().zip(&sum_g) {
            *d += s;
        }
    }
    if nodes[gamma].needs_grad {
        let dg = grad_buf(nodes, grads, gamma);
        for (d, &s) in dg.iter_mut().zip(&sum_g_xhat) {
            *d += s;
        }
    }
    if nodes[x].needs_grad {
        let dx = grad_buf(nodes, grads, x);
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * hw;
                let scale = gv[ch] * inv_std[ch];
                if training {
                    let inv_m = S::one() / m;
                    let (sg, sgx) = (sum_g[ch], sum_g_xhat[ch]);
                    for j in base..base + hw {
                        dx[j] += scale * (g[j] - (sg + xhat[j] * sgx) * inv_m);
                    }
                } else {
                    for j in base..base + hw {
                        dx[j] += scale * g[j];
                    }
                }
            }
        }
    }
}
