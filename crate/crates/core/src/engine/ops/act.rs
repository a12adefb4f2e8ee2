//! Elementwise activation, softmax, and the cross-entropy loss head.

use crate::engine::scalar::Scalar;
use crate::engine::tape::{grad_buf, Node, Op, Tape, TensorId};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

impl<S: Scalar> Tape<S> {
    /// Elementwise max(x, 0). The subgradient at exactly 0 is taken as 0.
    pub fn relu(&mut self, x: TensorId) -> Result<TensorId> {
        let xv = self.value(x);
        let out = Tensor::new(
            xv.shape().to_vec(),
            xv.data().iter().map(|&v| if v > S::zero() { v } else { S::zero() }).collect(),
        )?;
        let needs = self.needs(&[x]);
        Ok(self.push_op(out, Op::Relu { x }, needs))
    }

    /// Mean softmax cross-entropy over the batch, stabilized by row-max
    /// subtraction. `labels[i]` is the true class index of row i.
    pub fn softmax_cross_entropy(&mut self, logits: TensorId, labels: &[usize]) -> Result<TensorId> {
        let lv = self.value(logits);
        let (n, k) = lv.dim2("softmax_cross_entropy")?;
        if labels.len() != n {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{n} logit rows but {} labels", labels.len()),
            ));
        }
        if let Some((i, &bad)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::invalid(
                "softmax_cross_entropy",
                format!("label {bad} at row {i} out of range for {k} classes"),
            ));
        }
        let probs = softmax_rows(lv)?;
        let data = lv.data();
        let mut total = S::zero();
        for (i, &label) in labels.iter().enumerate() {
            let row = &data[i * k..(i + 1) * k];
            let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
            let sum_exp: S = row.iter().map(|&z| (z - max).exp()).sum();
            let lse = max + sum_exp.ln();
            total += lse - row[label];
        }
        let loss = total / S::of(n as f64);
        let needs = self.needs(&[logits]);
        Ok(self.push_op(
            Tensor::scalar(loss),
            Op::SoftmaxXent { logits, probs: probs.into_data(), labels: labels.to_vec() },
            needs,
        ))
    }

    /// Scalar projection sum(x ⊙ weights); gradient-check harness op.
    pub fn weighted_sum(&mut self, x: TensorId, weights: Vec<S>) -> Result<TensorId> {
        let xv = self.value(x);
        if weights.len() != xv.len() {
            return Err(Error::shape(
                "weighted_sum",
                format!("{} elements vs {} weights", xv.len(), weights.len()),
            ));
        }
        let s = crate::engine::linalg::dot(xv.data(), &weights);
        let needs = self.needs(&[x]);
        Ok(self.push_op(Tensor::scalar(s), Op::WeightedSum { x, weights }, needs))
    }
}

/// Row-wise softmax of an N x K matrix, stabilized by max subtraction.
/// Pure function (not taped) — used by the loss op and by evaluation.
pub fn softmax_rows<S: Scalar>(logits: &Tensor<S>) -> Result<Tensor<S>> {
    let (n, k) = logits.dim2("softmax_rows")?;
    let mut out = vec![S::zero(); n * k];
    for i in 0..n {
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
        let dst = &mut out[i * k..(i + 1) * k];
        let mut sum = S::zero();
        for (d, &z) in dst.iter_mut().zip(row) {
            *d = (z - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    Tensor::new(vec![n, k], out)
}

/// Row-wise argmax; ties resolve to the lowest index.
pub fn argmax_rows<S: Scalar>(scores: &Tensor<S>) -> Result<Vec<usize>> {
    let (n, k) = scores.dim2("argmax_rows")?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = &scores.data()[i * k..(i + 1) * k];
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        out.push(best);
    }
    Ok(out)
}

pub(crate) fn backward_relu<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    x: TensorId,
    g: &[S],
) {
    let xv = nodes[x].value.data();
    let gx = grad_buf(nodes, grads, x);
    for ((gx, &xv), &gv) in gx.iter_mut().zip(xv).zip(g) {
        if xv > S::zero() {
            *gx += gv;
        }
    }
}

pub(crate) fn backward_softmax_xent<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    logits: TensorId,
    probs: &[S],
    labels: &[usize],
    g: &[S],
) {
    let k = nodes[logits].value.shape()[1];
    let scale = g[0] / S::of(labels.len() as f64);
    let gl = grad_buf(nodes, grads, logits);
    for (i, &label) in labels.iter().enumerate() {
        let row = &probs[i * k..(i + 1) * k];
        let dst = &mut gl[i * k..(i + 1) * k];
        for (j, (d, &p)) in dst.iter_mut().zip(row).enumerate() {
            let onehot = if j == label { S::one() } else { S::zero() };
            *d += (p - onehot) * scale;
        }
    }
}

pub(crate) fn backward_weighted_sum<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    x: TensorId,
    weights: &[S],
    g: &[S],
) {
    let gx = grad_buf(nodes, grads, x);
    for (d, &w) in gx.iter_mut().zip(weights) {
        *d += g[0] * w;
    }
}
