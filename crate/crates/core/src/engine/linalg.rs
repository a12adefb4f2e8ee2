//! Small dense-matrix kernels backing convolution and linear layers.
//!
//! These are deliberately plain row-major loops arranged so LLVM can
//! auto-vectorize them: the hot GEMM updates four output rows per pass over a
//! B row, and reductions use a fixed-width lane accumulator (a fixed
//! reassociation order, so results are bitwise reproducible run to run).

use crate::engine::scalar::Scalar;

const LANES: usize = 8;

/// c(m x n) += a(m x k) @ b(k x n), row-major.
pub fn matmul_acc<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let mut i = 0;
    while i + 4 <= m {
        let (head, tail) = c[i * n..].split_at_mut(n);
        let (r1, tail) = tail.split_at_mut(n);
        let (r2, tail) = tail.split_at_mut(n);
        let r3 = &mut tail[..n];
        let r0 = head;
        for p in 0..k {
            let bp = &b[p * n..p * n + n];
            let a0 = a[i * k + p];
            let a1 = a[(i + 1) * k + p];
            let a2 = a[(i + 2) * k + p];
            let a3 = a[(i + 3) * k + p];
            for j in 0..n {
                r0[j] += a0 * bp[j];
                r1[j] += a1 * bp[j];
                r2[j] += a2 * bp[j];
                r3[j] += a3 * bp[j];
            }
        }
        i += 4;
    }
    while i < m {
        let row = &mut c[i * n..i * n + n];
        for p in 0..k {
            let bp = &b[p * n..p * n + n];
            let av = a[i * k + p];
            for j in 0..n {
                row[j] += av * bp[j];
            }
        }
        i += 1;
    }
}

/// Allocating convenience wrapper over [`matmul_acc`].
pub fn matmul<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut c = vec![S::zero(); m * n];
    matmul_acc(a, b, &mut c, m, k, n);
    c
}

/// c(m x n) += a(m x k) @ b(n x k)^T — i.e. every output element is a dot
/// product of an `a` row with a `b` row. Used for weight gradients, where the
/// right operand is naturally laid out transposed.
pub fn matmul_a_bt_acc<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let ar = &a[i * k..i * k + k];
        let crow = &mut c[i * n..i * n + n];
        for j in 0..n {
            let br = &b[j * k..j * k + k];
            crow[j] += dot(ar, br);
        }
    }
}

/// Lane-accumulated dot product with a fixed combination tree.
#[inline]
pub fn dot<S: Scalar>(x: &[S], y: &[S]) -> S {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [S::zero(); LANES];
    let chunks = x.len() / LANES;
    for c in 0..chunks {
        let xs = &x[c * LANES..c * LANES + LANES];
        let ys = &y[c * LANES..c * LANES + LANES];
        for l in 0..LANES {
            acc[l] = acc[l] + xs[l] * ys[l];
        }
    }
    let mut tail = S::zero();
    for t in chunks * LANES..x.len() {
        tail += x[t] * y[t];
    }
    let half = (acc[0] + acc[4]) + (acc[2] + acc[6]);
    let other = (acc[1] + acc[5]) + (acc[3] + acc[7]);
    half + other + tail
}

/// Row-major transpose of an (rows x cols) matrix.
pub fn transpose<S: Scalar>(a: &[S], rows: usize, cols: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), rows * cols);
    let mut out = vec![S::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}
