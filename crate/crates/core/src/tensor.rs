//! Dense row-major tensors and the error type shared by every kernel.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("shape {shape:?} holds {expected} elements but {actual} were supplied")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape {0:?} has a zero-sized dimension")]
    ZeroDim(Vec<usize>),
    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },
    #[error("causal-left padding requires a 1-D convolution, got rank {rank}")]
    CausalRank { rank: usize },
    #[error("invalid convolution spec: {0}")]
    InvalidSpec(String),
    #[error("{op}: axis size {size} is not divisible by {parts}")]
    Divisibility {
        op: &'static str,
        size: usize,
        parts: usize,
    },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { op: &'static str, axis: usize, rank: usize },
    #[error("reduction over an empty (fully masked) set")]
    EmptyReduction,
    #[error("batch_norm: non-positive variance estimate in channel {channel}")]
    NonPositiveVariance { channel: usize },
    #[error("variable does not belong to this tape")]
    TapeGap,
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("gradient check: two forward passes disagree")]
    NonDeterministic,
}

pub type Result<T, E = TensorError> = core::result::Result<T, E>;

/// Dense n-dimensional array in row-major order.
///
/// Every dimension is positive and `data.len()` equals the product of the
/// shape. A scalar is represented with shape `[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(TensorError::ZeroDim(shape.to_vec()));
    }
    Ok(())
}

impl<F: Scalar> Tensor<F> {
    /// Builds a tensor, rejecting bad shapes and non-finite data.
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        check_shape(&shape)?;
        let expected = numel(&shape);
        if expected != data.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        let t = Tensor { shape, data };
        t.ensure_finite("tensor")?;
        Ok(t)
    }

    /// Kernel-internal constructor; the caller guarantees the length.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<F>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor { shape, data }
    }

    pub fn full(shape: &[usize], value: F) -> Result<Self> {
        check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, F::zero())
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::full(shape, F::one())
    }

    pub fn scalar(value: F) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds a tensor from a generator over flat indices.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> F) -> Result<Self> {
        check_shape(shape)?;
        let data = (0..numel(shape)).map(&mut f).collect();
        Tensor::new(shape.to_vec(), data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Value at a multi-index.
    pub fn at(&self, index: &[usize]) -> F {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            assert!(i < d, "index out of bounds");
            flat = flat * d + i;
        }
        self.data[flat]
    }

    /// Returns the single value of a one-element tensor.
    pub fn item(&self) -> Option<F> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        if numel(shape) != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                detail: alloc::format!("{:?} -> {:?}", self.shape, shape),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| G::of(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(TensorError::NonFinite { op })
        }
    }

    /// Largest absolute elementwise difference, `None` when shapes differ.
    pub fn max_abs_diff(&self, other: &Tensor<F>) -> Option<F> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .fold(F::zero(), |m, (&a, &b)| m.max((a - b).abs())),
        )
    }

    /// Bitwise equality of shape and payload.
    pub fn bit_eq(&self, other: &Tensor<F>) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.as_f64().to_bits() == b.as_f64().to_bits())
    }
}
