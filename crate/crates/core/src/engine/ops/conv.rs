//! 2-D convolution via image-to-column + matrix multiply.
//!
//! The forward pass flattens each receptive field into a column, turning the
//! convolution into `W(O x CKK) @ cols(CKK x OHOW)` per sample. The backward
//! pass recomputes the columns (cheaper than caching them) and uses the same
//! kernels: `dW += g @ cols^T`, `dcols = W^T @ g` scattered back by the
//! column builder's inverse. A naive nested-loop reference lives in the test
//! suite and cross-checks this path.

use crate::engine::linalg::{matmul, matmul_a_bt_acc, matmul_acc, transpose};
use crate::engine::scalar::Scalar;
use crate::engine::tape::{grad_buf, Node, Op, Tape, TensorId};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

impl ConvDims {
    fn resolve<S: Scalar>(
        x: &Tensor<S>,
        w: &Tensor<S>,
        b: Option<&Tensor<S>>,
        stride: usize,
        (ph, pw): (usize, usize),
    ) -> Result<Self> {
        let (n, cin, h, iw) = x.dim4("conv2d")?;
        let (cout, wc, kh, kw) = w.dim4("conv2d")?;
        if cin != wc {
            return Err(Error::shape(
                "conv2d",
                format!("input {:?} has {cin} channels but weight {:?} expects {wc}", x.shape(), w.shape()),
            ));
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d", "stride must be >= 1"));
        }
        if kh > h + 2 * ph || kw > iw + 2 * pw {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "kernel {kh}x{kw} larger than padded input {}x{} (input {:?}, padding {ph}x{pw})",
                    h + 2 * ph,
                    iw + 2 * pw,
                    x.shape()
                ),
            ));
        }
        if let Some(b) = b {
            if b.shape() != [cout] {
                return Err(Error::shape(
                    "conv2d",
                    format!("bias {:?} does not match {cout} output channels", b.shape()),
                ));
            }
        }
        let oh = (h + 2 * ph - kh) / stride + 1;
        let ow = (iw + 2 * pw - kw) / stride + 1;
        Ok(ConvDims { n, cin, h, w: iw, cout, kh, kw, stride, ph, pw, oh, ow })
    }

    #[inline]
    fn ckk(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    #[inline]
    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// 1x1/stride-1/no-pad convolutions skip the column build entirely: the
    /// input channel plane matrix *is* the column matrix.
    #[inline]
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.ph == 0 && self.pw == 0
    }
}

fn im2col<S: Scalar>(x: &[S], d: &ConvDims, out: &mut [S]) {
    let p = d.cols();
    let mut row = 0usize;
    for c in 0..d.cin {
        let xc = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ki in 0..d.kh {
            for kj in 0..d.kw {
                let dst_row = &mut out[row * p..(row + 1) * p];
                row += 1;
                for oy in 0..d.oh {
                    let iy = (oy * d.stride + ki) as isize - d.ph as isize;
                    let dst = &mut dst_row[oy * d.ow..(oy + 1) * d.ow];
                    if iy < 0 || iy >= d.h as isize {
                        dst.iter_mut().for_each(|v| *v = S::zero());
                        continue;
                    }
                    let base = iy as usize * d.w;
                    for (ox, dv) in dst.iter_mut().enumerate() {
                        let ix = (ox * d.stride + kj) as isize - d.pw as isize;
                        *dv = if ix >= 0 && ix < d.w as isize {
                            xc[base + ix as usize]
                        } else {
                            S::zero()
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add inverse of [`im2col`]: folds column gradients back onto the
/// input gradient plane, summing where receptive fields overlap.
fn col2im_add<S: Scalar>(cols: &[S], d: &ConvDims, dx: &mut [S]) {
    let p = d.cols();
    let mut row = 0usize;
    for c in 0..d.cin {
        let plane = c * d.h * d.w;
        for ki in 0..d.kh {
            for kj in 0..d.kw {
                let src_row = &cols[row * p..(row + 1) * p];
                row += 1;
                for oy in 0..d.oh {
                    let iy = (oy * d.stride + ki) as isize - d.ph as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let base = plane + iy as usize * d.w;
                    let src = &src_row[oy * d.ow..(oy + 1) * d.ow];
                    for (ox, &sv) in src.iter().enumerate() {
                        let ix = (ox * d.stride + kj) as isize - d.pw as isize;
                        if ix >= 0 && ix < d.w as isize {
                            dx[base + ix as usize] += sv;
                        }
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Tape<S> {
    /// 2-D convolution, NCHW input, OIKK weight, optional per-channel bias.
    /// `padding` is (vertical, horizontal) so asymmetric kernels (1x7, 7x1,
    /// 1x3, 3x1) can preserve spatial size.
    pub fn conv2d(
        &mut self,
        x: TensorId,
        w: TensorId,
        b: Option<TensorId>,
        stride: usize,
        padding: (usize, usize),
    ) -> Result<TensorId> {
        let d = ConvDims::resolve(
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
            stride,
            padding,
        )?;
        let (ckk, p) = (d.ckk(), d.cols());
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let mut out = vec![S::zero(); d.n * d.cout * p];
        let mut colbuf = if d.is_pointwise() { Vec::new() } else { vec![S::zero(); ckk * p] };
        for i in 0..d.n {
            let xs = &xv[i * d.cin * d.h * d.w..(i + 1) * d.cin * d.h * d.w];
            let cols: &[S] = if d.is_pointwise() {
                xs
            } else {
                im2col(xs, &d, &mut colbuf);
                &colbuf
            };
            matmul_acc(wv, cols, &mut out[i * d.cout * p..(i + 1) * d.cout * p], d.cout, ckk, p);
        }
        if let Some(bid) = b {
            let bv = self.value(bid).data().to_vec();
            for i in 0..d.n {
                for (o, &bo) in bv.iter().enumerate() {
                    let row = &mut out[(i * d.cout + o) * p..(i * d.cout + o + 1) * p];
                    row.iter_mut().for_each(|v| *v += bo);
                }
            }
        }
        let value = Tensor::new(vec![d.n, d.cout, d.oh, d.ow], out)?;
        let mut dep = vec![x, w];
        if let Some(bid) = b {
            dep.push(bid);
        }
        let needs = self.needs(&dep);
        Ok(self.push_op(value, Op::Conv2d { x, w, b, stride, pad: padding }, needs))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_conv2d<S: Scalar>(
    nodes: &[Node<S>],
    grads: &mut [Option<Vec<S>>],
    x: TensorId,
    w: TensorId,
    b: Option<TensorId>,
    stride: usize,
    pad: (usize, usize),
    g: &[S],
) {
    let d = ConvDims::resolve(
        &nodes[x].value,
        &nodes[w].value,
        b.map(|b| &nodes[b].value),
        stride,
        pad,
    )
    .expect("conv dims revalidated in backward");
    let (ckk, p) = (d.ckk(), d.cols());
    let xv = nodes[x].value.data();
    let wv = nodes[w].value.data();
    let needs_dx = nodes[x].needs_grad;
    let needs_dw = nodes[w].needs_grad;

    if let Some(bid) = b {
        if nodes[bid].needs_grad {
            let db = grad_buf(nodes, grads, bid);
            for i in 0..d.n {
                for o in 0..d.cout {
                    let row = &g[(i * d.cout + o) * p..(i * d.cout + o + 1) * p];
                    let mut s = S::zero();
                    for &v in row {
                        s += v;
                    }
                    db[o] += s;
                }
            }
        }
    }

    let wt = if needs_dx { transpose(wv, d.cout, ckk) } else { Vec::new() };
    let mut colbuf = if d.is_pointwise() { Vec::new() } else { vec![S::zero(); ckk * p] };
    // dW is accumulated serially in sample order so results are independent
    // of any outer parallelism.
    let mut dw_acc = if needs_dw { vec![S::zero(); d.cout * ckk] } else { Vec::new() };
    let mut dx_acc = if needs_dx { vec![S::zero(); d.n * d.cin * d.h * d.w] } else { Vec::new() };

    for i in 0..d.n {
        let gsl = &g[i * d.cout * p..(i + 1) * d.cout * p];
        if needs_dw {
            let xs = &xv[i * d.cin * d.h * d.w..(i + 1) * d.cin * d.h * d.w];
            let cols: &[S] = if d.is_pointwise() {
                xs
            } else {
                im2col(xs, &d, &mut colbuf);
                &colbuf
            };
            matmul_a_bt_acc(gsl, cols, &mut dw_acc, d.cout, p, ckk);
        }
        if needs_dx {
            let dx_i = &mut dx_acc[i * d.cin * d.h * d.w..(i + 1) * d.cin * d.h * d.w];
            if d.is_pointwise() {
                matmul_acc(&wt, gsl, dx_i, ckk, d.cout, p);
            } else {
                let dcols = matmul(&wt, gsl, ckk, d.cout, p);
                col2im_add(&dcols, &d, dx_i);
            }
        }
    }

    if needs_dw {
        let dw = grad_buf(nodes, grads, w);
        for (dst, src) in dw.iter_mut().zip(&dw_acc) {
            *dst += *src;
        }
    }
    if needs_dx {
        let dx = grad_buf(nodes, grads, x);
        for (dst, src) in dx.iter_mut().zip(&dx_acc) {
            *dst += *src;
        }
    }
}
