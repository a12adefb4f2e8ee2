//! Channel concatenation (the fan-in point of dense blocks and inception
//! branches).

use crate::engine::scalar::Scalar;
use crate::engine::tape::{grad_buf, Node, Op, Tape, TensorId};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

impl<S: Scalar> Tape<S> {
    /// Concatenates NCHW tensors along the channel axis. All inputs must
    /// agree on batch and spatial extents.
    pub fn concat_channels(&mut self, xs: &[TensorId]) -> Result<TensorId> {
        if xs.is_empty() {
            return Err(Error::invalid("concat", "no inputs"));
        }
        let (n, c0, h, w) = self.value(xs[0]).dim4("concat")?;
        let mut c_total = c0;
        for (idx, &x) in xs.iter().enumerate().skip(1) {
            let (ni, ci, hi, wi) = self.value(x).dim4("concat")?;
            if (ni, hi, wi) != (n, h, w) {
                return Err(Error::shape(
                    "concat",
                    format!(
                        "input {idx} has shape {:?}, expected batch/spatial {n}x_x{h}x{w}",
                        self.value(x).shape()
                    ),
                ));
            }
            c_total += ci;
        }
        let hw = h * w;
        let mut out = vec![S::zero(); n * c_total * hw];
        for i in 0..n {
            let mut offset = 0usize;
            for &x in xs {
                let xv = self.value(x);
                let ci = xv.shape()[1];
                let src = &xv.data()[i * ci * hw..(i + 1) * ci * hw];
                out[(i * c_total + offset) * hw..(i * c_total + offset + ci) * hw]
                    .copy_from_slice(src);
                offset += ci;
            }
        }
        let value = Tensor::new(vec![n, c_total, h, w], out)?;
        let needs = self.needs(xs);
        Ok(self.push_op(value, Op::Concat { xs: xs.to_vec() }, needs))
    }
}

pub(crate) fn backward_concat<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    xs: &[TensorId],
    g: &[S],
) {
    let (n, _, h, w) = nodes[xs[0]].value.dim4("concat").expect("revalidated");
    let hw = h * w;
    let c_total: usize = xs.iter().map(|&x| nodes[x].value.shape()[1]).sum();
    let mut offset = 0usize;
    for &x in xs {
        let ci = nodes[x].value.shape()[1];
        if nodes[x].needs_grad {
            let gx = grad_buf(nodes, grads, x);
            for i in 0..n {
                let src = &g[(i * c_total + offset) * hw..(i * c_total + offset + ci) * hw];
                let dst = &mut gx[i * ci * hw..(i + 1) * ci * hw];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        offset += ci;
    }
}
