use crate::engine::scalar::Scalar;
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a tensor on a [`Tape`].
pub type TensorId = usize;

/// One recorded operation: the produced value plus whatever the backward
/// rule needs. Inputs are ids of earlier nodes, so the tape is topologically
/// ordered by construction.
pub(crate) struct Node<S> {
    pub value: Tensor<S>,
    pub op: Op<S>,
    pub needs_grad: bool,
}

pub(crate) enum Op<S> {
    Leaf,
    Relu {
        x: TensorId,
    },
    Conv2d {
        x: TensorId,
        w: TensorId,
        b: Option<TensorId>,
        stride: usize,
        pad: (usize, usize),
    },
    MaxPool {
        x: TensorId,
        /// Flat input index of the winning element per output element;
        /// `u32::MAX` marks a window with no valid (non-padding) cell.
        /// This fully determines the backward routing.
        argmax: Vec<u32>,
    },
    AvgPool {
        x: TensorId,
        window: usize,
        stride: usize,
        pad: usize,
    },
    GlobalAvgPool {
        x: TensorId,
    },
    BatchNorm {
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        /// Normalized input, saved by both modes.
        xhat: Vec<S>,
        /// Per-channel 1/sqrt(var + eps) actually used by the forward pass.
        inv_std: Vec<S>,
        training: bool,
    },
    Concat {
        xs: Vec<TensorId>,
    },
    Linear {
        x: TensorId,
        w: TensorId,
        b: TensorId,
    },
    SoftmaxXent {
        logits: TensorId,
        probs: Vec<S>,
        labels: Vec<usize>,
    },
    /// Scalar projection sum(x * weights); the harness that turns any op
    /// output into a scalar loss for gradient checking.
    WeightedSum {
        x: TensorId,
        weights: Vec<S>,
    },
}

/// Reverse-mode autodiff tape.
///
/// Values are immutable once recorded; `backward` walks the nodes in reverse
/// and accumulates gradients into a parallel buffer, which callers read via
/// [`Tape::grad`]. A tape built with [`Tape::inference`] records every result
/// as a leaf (no intermediates are saved) and refuses to run backward.
pub struct Tape<S> {
    pub(crate) nodes: Vec<Node<S>>,
    pub(crate) grads: Vec<Option<Vec<S>>>,
    inference: bool,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new(), inference: false }
    }

    /// A tape that only evaluates forward; ops skip saving backward state.
    pub fn inference() -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new(), inference: true }
    }

    pub fn is_inference(&self) -> bool {
        self.inference
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a constant input (no gradient tracked).
    pub fn leaf(&mut self, value: Tensor<S>) -> TensorId {
        self.push(value, Op::Leaf, false)
    }

    /// Records a differentiable input (a parameter or a checked input).
    pub fn param(&mut self, value: Tensor<S>) -> TensorId {
        let track = !self.inference;
        self.push(value, Op::Leaf, track)
    }

    pub fn value(&self, id: TensorId) -> &Tensor<S> {
        &self.nodes[id].value
    }

    /// Gradient of the last `backward` root w.r.t. node `id`, if any flowed.
    pub fn grad(&self, id: TensorId) -> Option<&[S]> {
        self.grads.get(id).and_then(|g| g.as_deref())
    }

    /// Moves a gradient buffer out of the tape (used by the optimizer).
    pub fn take_grad(&mut self, id: TensorId) -> Option<Vec<S>> {
        self.grads.get_mut(id).and_then(|g| g.take())
    }

    pub(crate) fn push(&mut self, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> TensorId {
        let id = self.nodes.len();
        self.nodes.push(Node { value, op, needs_grad });
        id
    }

    /// Records an op result, downgrading to a leaf on inference tapes.
    pub(crate) fn push_op(&mut self, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> TensorId {
        if self.inference {
            self.push(value, Op::Leaf, false)
        } else {
            self.push(value, op, needs_grad)
        }
    }

    pub(crate) fn needs(&self, ids: &[TensorId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    /// Reverse pass seeding d(root)/d(root) = 1. `root` must be a scalar
    /// (single-element) tensor. Gradients of interior nodes are dropped once
    /// consumed; leaf gradients remain readable until the next backward.
    pub fn backward(&mut self, root: TensorId) -> Result<()> {
        if self.inference {
            return Err(Error::invalid("Tape::backward", "tape was built in inference mode"));
        }
        if root >= self.nodes.len() {
            return Err(Error::invalid("Tape::backward", format!("no node {root} on tape")));
        }
        if self.nodes[root].value.len() != 1 {
            return Err(Error::shape(
                "Tape::backward",
                format!("root must be scalar, got shape {:?}", self.nodes[root].value.shape()),
            ));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[root] = Some(vec![S::one()]);
        for id in (0..=root).rev() {
            if matches!(self.nodes[id].op, Op::Leaf) {
                continue; // leaf gradients stay in place for the caller
            }
            let Some(g) = self.grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            self.dispatch_backward(id, &g)?;
        }
        Ok(())
    }

    fn dispatch_backward(&mut self, id: TensorId, g: &[S]) -> Result<()> {
        // Split borrows: values are read from `nodes`, gradients are written
        // into the parallel `grads` vector.
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        match &nodes[id].op {
            Op::Leaf => {}
            Op::Relu { x } => crate::engine::ops::act::backward_relu(nodes, grads, *x, g),
            Op::Conv2d { x, w, b, stride, pad } => {
                crate::engine::ops::conv::backward_conv2d(nodes, grads, *x, *w, *b, *stride, *pad, g)
            }
            Op::MaxPool { x, argmax, .. } => {
                crate::engine::ops::pool::backward_max_pool(nodes, grads, *x, argmax, g)
            }
            Op::AvgPool { x, window, stride, pad } => {
                crate::engine::ops::pool::backward_avg_pool(nodes, grads, *x, *window, *stride, *pad, g)
            }
            Op::GlobalAvgPool { x } => {
                crate::engine::ops::pool::backward_global_avg_pool(nodes, grads, *x, g)
            }
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, training } => {
                crate::engine::ops::norm::backward_batch_norm(
                    nodes, grads, *x, *gamma, *beta, xhat, inv_std, *training, g,
                )
            }
            Op::Concat { xs } => crate::engine::ops::shape::backward_concat(nodes, grads, xs, g),
            Op::Linear { x, w, b } => {
                crate::engine::ops::linear::backward_linear(nodes, grads, *x, *w, *b, g)
            }
            Op::SoftmaxXent { logits, probs, labels } => {
                crate::engine::ops::act::backward_softmax_xent(nodes, grads, *logits, probs, labels, g)
            }
            Op::WeightedSum { x, weights } => {
                crate::engine::ops::act::backward_weighted_sum(nodes, grads, *x, weights, g)
            }
        }
        Ok(())
    }
}

/// Returns a zero-initialized gradient buffer for `id`, allocating on first
/// touch. Ops accumulate (`+=`) into it so fan-out sums naturally.
pub(crate) fn grad_buf<'a, S: Scalar>(
    nodes: &[Node<S>],
    grads: &'a mut [Option<Vec<S>>],
    id: TensorId,
) -> &'a mut [S] {
    let len = nodes[id].value.len();
    grads[id].get_or_insert_with(|| vec![S::zero(); len])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::zeros(vec![2, 2]));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn inference_tape_refuses_backward() {
        let mut tape = Tape::<f32>::inference();
        let x = tape.param(Tensor::scalar(1.0));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn leaf_gradient_survives_backward() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::scalar(3.0));
        // Identity-ish graph: weighted sum with weight 2 -> dy/dx = 2.
        let y = tape.weighted_sum(x, vec![2.0]).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0]);
    }
}
