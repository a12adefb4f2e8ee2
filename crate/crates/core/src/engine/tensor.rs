use rand::Rng;

use crate::engine::scalar::Scalar;
use crate::error::{Error, Result};

/// Dense n-dimensional array in row-major order.
///
/// The element product of `shape` always equals `data.len()`; constructors
/// enforce this. Gradients are not stored here — they live on the tape node
/// that produced the tensor, so values stay immutable once computed.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S = f32> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Builds a tensor from a shape and matching flat buffer.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<S>) -> Result<Self> {
        let shape = shape.into();
        let expect: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("Tensor::new", format!("zero extent in shape {shape:?}")));
        }
        if expect != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {shape:?} implies {expect} elements, buffer has {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Tensor { shape, data: vec![S::zero(); n] }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: S) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Tensor { shape, data: vec![value; n] }
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, S::one())
    }

    /// Single-element tensor, used for scalar losses.
    pub fn scalar(value: S) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    /// He-uniform initialization: U(-b, b) with b = sqrt(6 / fan_in).
    /// Draws are made in f64 and narrowed, so a given seed produces the same
    /// underlying sequence regardless of the scalar type.
    pub fn he_uniform(shape: impl Into<Vec<usize>>, fan_in: usize, rng: &mut impl Rng) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let data = (0..n).map(|_| S::of(rng.gen_range(-bound..bound))).collect();
        Tensor { shape, data }
    }

    /// Uniform draws in [lo, hi), mostly for tests and synthetic inputs.
    pub fn rand_uniform(
        shape: impl Into<Vec<usize>>,
        lo: f64,
        hi: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| S::of(rng.gen_range(lo..hi))).collect();
        Tensor { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Number of elements.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    /// Interprets the tensor as NCHW and returns the four extents.
    pub fn dim4(&self, op: &'static str) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::shape(op, format!("expected rank-4 NCHW tensor, got shape {:?}", self.shape))),
        }
    }

    /// Interprets the tensor as a matrix and returns (rows, cols).
    pub fn dim2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(op, format!("expected rank-2 tensor, got shape {:?}", self.shape))),
        }
    }

    /// Element access by multi-index; intended for tests and small tensors.
    pub fn at(&self, index: &[usize]) -> S {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        let mut flat = 0;
        for (i, (&ix, &ext)) in index.iter().zip(&self.shape).enumerate() {
            assert!(ix < ext, "index {ix} out of range for axis {i} (extent {ext})");
            flat = flat * ext + ix;
        }
        self.data[flat]
    }

    /// Reinterprets the buffer under a new shape of equal element count.
    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::shape(
                "Tensor::reshape",
                format!("cannot reshape {:?} ({} elements) to {shape:?} ({expect} elements)", self.shape, self.data.len()),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts element type, used when writing/reading f32 checkpoints.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| T::of(v.to_f64())).collect(),
        }
    }

    /// Stack equally-shaped tensors along a new leading axis.
    pub fn stack(tensors: &[&Tensor<S>]) -> Result<Self> {
        let first = tensors
            .first()
            .ok_or_else(|| Error::invalid("Tensor::stack", "nothing to stack"))?;
        let mut data = Vec::with_capacity(first.len() * tensors.len());
        for (i, t) in tensors.iter().enumerate() {
            if t.shape() != first.shape() {
                return Err(Error::shape(
                    "Tensor::stack",
                    format!("tensor {i} has shape {:?}, expected {:?}", t.shape(), first.shape()),
                ));
            }
            data.extend_from_slice(t.data());
        }
        let mut shape = Vec::with_capacity(first.rank() + 1);
        shape.push(tensors.len());
        shape.extend_from_slice(first.shape());
        Tensor::new(shape, data)
    }
}

impl Tensor<f32> {
    /// Lossless f32 view conversion for checkpoint serialization.
    pub fn from_f32_parts(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Tensor::new(shape, data)
    }
}
