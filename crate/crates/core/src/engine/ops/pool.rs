//! Max, average, and global-average pooling.

use crate::engine::scalar::Scalar;
use crate::engine::tape::{grad_buf, Node, Op, Tape, TensorId};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

struct PoolDims {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
}

fn pool_dims<S: Scalar>(
    op: &'static str,
    x: &Tensor<S>,
    window: usize,
    stride: usize,
    pad: usize,
) -> Result<PoolDims> {
    let (n, c, h, w) = x.dim4(op)?;
    if window == 0 || stride == 0 {
        return Err(Error::invalid(op, "window and stride must be >= 1"));
    }
    if window > h + 2 * pad || window > w + 2 * pad {
        return Err(Error::shape(
            op,
            format!("window {window} larger than padded input {}x{}", h + 2 * pad, w + 2 * pad),
        ));
    }
    let oh = (h + 2 * pad - window) / stride + 1;
    let ow = (w + 2 * pad - window) / stride + 1;
    Ok(PoolDims { n, c, h, w, oh, ow })
}

impl<S: Scalar> Tape<S> {
    /// Max pooling. Padded cells never win (they are treated as -inf); ties
    /// break to the first element in row-major window scan order, and the
    /// winner's index is recorded for the backward routing.
    pub fn max_pool2d(
        &mut self,
        x: TensorId,
        window: usize,
        stride: usize,
        pad: usize,
    ) -> Result<TensorId> {
        let d = pool_dims("max_pool2d", self.value(x), window, stride, pad)?;
        let xv = self.value(x).data();
        let track = !self.is_inference();
        let mut out = vec![S::zero(); d.n * d.c * d.oh * d.ow];
        let mut argmax = if track { vec![0u32; out.len()] } else { Vec::new() };
        let mut oi = 0usize;
        for i in 0..d.n {
            for c in 0..d.c {
                let plane = (i * d.c + c) * d.h * d.w;
                for oy in 0..d.oh {
                    for ox in 0..d.ow {
                        let mut best = S::neg_infinity();
                        let mut best_idx = u32::MAX;
                        for ki in 0..window {
                            let iy = (oy * stride + ki) as isize - pad as isize;
                            if iy < 0 || iy >= d.h as isize {
                                continue;
                            }
                            for kj in 0..window {
                                let ix = (ox * stride + kj) as isize - pad as isize;
                                if ix < 0 || ix >= d.w as isize {
                                    continue;
                                }
                                let idx = plane + iy as usize * d.w + ix as usize;
                                if xv[idx] > best {
                                    best = xv[idx];
                                    best_idx = idx as u32;
                                }
                            }
                        }
                        out[oi] = if best_idx == u32::MAX { S::zero() } else { best };
                        if track {
                            argmax[oi] = best_idx;
                        }
                        oi += 1;
                    }
                }
            }
        }
        let value = Tensor::new(vec![d.n, d.c, d.oh, d.ow], out)?;
        let needs = self.needs(&[x]);
        Ok(self.push_op(value, Op::MaxPool { x, argmax }, needs))
    }

    /// Average pooling; the divisor is always the full window area, so padded
    /// cells count as zeros (matching the usual transition-layer semantics).
    pub fn avg_pool2d(
        &mut self,
        x: TensorId,
        window: usize,
        stride: usize,
        pad: usize,
    ) -> Result<TensorId> {
        let d = pool_dims("avg_pool2d", self.value(x), window, stride, pad)?;
        let xv = self.value(x).data();
        let inv_area = S::one() / S::of((window * window) as f64);
        let mut out = vec![S::zero(); d.n * d.c * d.oh * d.ow];
        let mut oi = 0usize;
        for i in 0..d.n {
            for c in 0..d.c {
                let plane = (i * d.c + c) * d.h * d.w;
                for oy in 0..d.oh {
                    for ox in 0..d.ow {
                        let mut sum = S::zero();
                        for ki in 0..window {
                            let iy = (oy * stride + ki) as isize - pad as isize;
                            if iy < 0 || iy >= d.h as isize {
                                continue;
                            }
                            for kj in 0..window {
                                let ix = (ox * stride + kj) as isize - pad as isize;
                                if ix < 0 || ix >= d.w as isize {
                                    continue;
                                }
                                sum += xv[plane + iy as usize * d.w + ix as usize];
                            }
                        }
                        out[oi] = sum * inv_area;
                        oi += 1;
                    }
                }
            }
        }
        let value = Tensor::new(vec![d.n, d.c, d.oh, d.ow], out)?;
        let needs = self.needs(&[x]);
        Ok(self.push_op(value, Op::AvgPool { x, window, stride, pad }, needs))
    }

    /// Per-channel spatial mean: NCHW -> NC.
    pub fn global_avg_pool(&mut self, x: TensorId) -> Result<TensorId> {
        let (n, c, h, w) = self.value(x).dim4("global_avg_pool")?;
        let xv = self.value(x).data();
        let inv = S::one() / S::of((h * w) as f64);
        let mut out = vec![S::zero(); n * c];
        for (o, chunk) in out.iter_mut().zip(xv.chunks_exact(h * w)) {
            let mut sum = S::zero();
            for &v in chunk {
                sum += v;
            }
            *o = sum * inv;
        }
        let value = Tensor::new(vec![n, c], out)?;
        let needs = self.needs(&[x]);
        Ok(self.push_op(value, Op::GlobalAvgPool { x }, needs))
    }
}

pub(crate) fn backward_max_pool<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    x: TensorId,
    argmax: &[u32],
    g: &[S],
) {
    let gx = grad_buf(nodes, grads, x);
    for (&idx, &gv) in argmax.iter().zip(g) {
        if idx != u32::MAX {
            gx[idx as usize] += gv;
        }
    }
}

pub(crate) fn backward_avg_pool<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    x: TensorId,
    window: usize,
    stride: usize,
    pad: usize,
    g: &[S],
) {
    let d = pool_dims("avg_pool2d", &nodes[x].value, window, stride, pad)
        .expect("pool dims revalidated in backward");
    let inv_area = S::one() / S::of((window * window) as f64);
    let gx = grad_buf(nodes, grads, x);
    let mut oi = 0usize;
    for i in 0..d.n {
        for c in 0..d.c {
            let plane = (i * d.c + c) * d.h * d.w;
            for oy in 0..d.oh {
                for ox in 0..d.ow {
                    let share = g[oi] * inv_area;
                    oi += 1;
                    for ki in 0..window {
                        let iy = (oy * stride + ki) as isize - pad as isize;
                        if iy < 0 || iy >= d.h as isize {
                            continue;
                        }
                        for kj in 0..window {
                            let ix = (ox * stride + kj) as isize - pad as isize;
                            if ix < 0 || ix >= d.w as isize {
                                continue;
                            }
                            gx[plane + iy as usize * d.w + ix as usize] += share;
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn backward_global_avg_pool<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    x: TensorId,
    g: &[S],
) {
    let (_, _, h, w) = nodes[x].value.dim4("global_avg_pool").expect("revalidated");
    let inv = S::one() / S::of((h * w) as f64);
    let gx = grad_buf(nodes, grads, x);
    for (chunk, &gv) in gx.chunks_exact_mut(h * w).zip(g) {
        let share = gv * inv;
        for d in chunk {
            *d += share;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_of_two_by_two() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = tape.max_pool2d(x, 2, 2, 0).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0]);
    }

    #[test]
    fn avg_of_two_by_two() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = tape.avg_pool2d(x, 2, 2, 0).unwrap();
        assert_eq!(tape.value(y).data(), &[2.5]);
    }

    #[test]
    fn max_tie_routes_gradient_to_first_in_scan_order() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::new(vec![1, 1, 2, 2], vec![7.0, 7.0, 7.0, 7.0]).unwrap());
        let y = tape.max_pool2d(x, 2, 2, 0).unwrap();
        let loss = tape.weighted_sum(y, vec![1.0]).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn padding_never_wins_max() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::new(vec![1, 1, 1, 1], vec![-5.0]).unwrap());
        let y = tape.max_pool2d(x, 3, 1, 1).unwrap();
        // Window covers only padding except the single real cell.
        assert_eq!(tape.value(y).data(), &[-5.0]);
    }

    #[test]
    fn avg_divisor_counts_padding() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::new(vec![1, 1, 1, 1], vec![9.0]).unwrap());
        let y = tape.avg_pool2d(x, 3, 1, 1).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0]); // 9 / (3*3)
    }

    #[test]
    fn oversized_window_rejected() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::ones(vec![1, 1, 2, 2]));
        assert!(tape.max_pool2d(x, 5, 1, 1).is_err());
    }

    #[test]
    fn global_avg_pool_constant_channel() {
        let mut tape = Tape::<f32>::new();
        let mut t = Tensor::zeros(vec![1, 2, 3, 3]);
        t.data_mut()[..9].iter_mut().for_each(|v| *v = 4.0);
        t.data_mut()[9..].iter_mut().for_each(|v| *v = -2.0);
        let x = tape.param(t);
        let y = tape.global_avg_pool(x).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 2]);
        assert_eq!(tape.value(y).data(), &[4.0, -2.0]);
    }

    #[test]
    fn global_avg_pool_arithmetic_mean() {
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Tensor::new(vec![1, 1, 1, 5], vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = tape.global_avg_pool(x).unwrap();
        assert_eq!(tape.value(y).data(), &[2.0]);
    }
}
