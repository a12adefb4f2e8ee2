//! Fully-connected (affine) layer: out = x @ w + b.

use crate::engine::linalg::{matmul_a_bt_acc, matmul_acc, transpose};
use crate::engine::scalar::Scalar;
use crate::engine::tape::{grad_buf, Node, Op, Tape, TensorId};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

impl<S: Scalar> Tape<S> {
    /// x: N x F, w: F x K, b: K -> N x K.
    pub fn linear(&mut self, x: TensorId, w: TensorId, b: TensorId) -> Result<TensorId> {
        let (n, f) = self.value(x).dim2("linear")?;
        let (wf, k) = self.value(w).dim2("linear")?;
        if f != wf {
            return Err(Error::shape(
                "linear",
                format!("input {:?} vs weight {:?}: inner dimensions {f} != {wf}", self.value(x).shape(), self.value(w).shape()),
            ));
        }
        if self.value(b).len() != k {
            return Err(Error::shape(
                "linear",
                format!("bias {:?} does not match {k} outputs", self.value(b).shape()),
            ));
        }
        let mut out = vec![S::zero(); n * k];
        matmul_acc(self.value(x).data(), self.value(w).data(), &mut out, n, f, k);
        let bv = self.value(b).data();
        for row in out.chunks_exact_mut(k) {
            for (o, &bb) in row.iter_mut().zip(bv) {
                *o += bb;
            }
        }
        let value = Tensor::new(vec![n, k], out)?;
        let needs = self.needs(&[x, w, b]);
        Ok(self.push_op(value, Op::Linear { x, w, b }, needs))
    }
}

pub(crate) fn backward_linear<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    x: TensorId,
    w: TensorId,
    b: TensorId,
    g: &[S],
) {
    let (n, f) = nodes[x].value.dim2("linear").expect("revalidated");
    let k = nodes[w].value.shape()[1];
    if nodes[b].needs_grad {
        let db = grad_buf(nodes, grads, b);
        for row in g.chunks_exact(k) {
            for (d, &gv) in db.iter_mut().zip(row) {
                *d += gv;
            }
        }
    }
    if nodes[w].needs_grad {
        // dw(F x K) = x^T(F x N) @ g(N x K)
        let xt = transpose(nodes[x].value.data(), n, f);
        let dw = grad_buf(nodes, grads, w);
        matmul_acc(&xt, g, dw, f, n, k);
    }
    if nodes[x].needs_grad {
        // dx(N x F) = g(N x K) @ w^T(K x F); w rows are length K, so the
        // transposed product maps onto the a @ b^T kernel directly.
        let dx = grad_buf(nodes, grads, x);
        matmul_a_bt_acc(g, nodes[w].value.data(), dx, n, k, f);
    }
}
