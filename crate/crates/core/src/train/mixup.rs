use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{Result, TrainError};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorError};

/// Inputs `[N, ...]`, soft targets `[N, classes]` and per-sample valid lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<F> {
    pub inputs: Tensor<F>,
    pub targets: Tensor<F>,
    pub valid_len: Vec<usize>,
}

impl<F: Scalar> Batch<F> {
    pub fn len(&self) -> usize {
        self.valid_len.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_len.is_empty()
    }
}

/// Draws `λ ~ Beta(alpha, alpha)`.
pub fn sample_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(TrainError::NonPositiveAlpha(alpha));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| TrainError::InvalidConfig(format!("beta: {e}")))?;
    Ok(beta.sample(rng))
}

/// `λ·a + (1 − λ)·b`, clamped to the elementwise interval spanned by `a` and `b`.
pub fn mix_pair<F: Scalar>(a: &[F], b: &[F], lambda: f64) -> Vec<F> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            let m = F::of(lambda * x.as_f64() + (1.0 - lambda) * y.as_f64());
            m.max(lo).min(hi)
        })
        .collect()
}

/// Mixes sample `i` of `a` with sample `i` of `b` using `lambdas[i]`.
///
/// The mixed valid length is that of the sole contributor when `λ` is 0 or 1
/// and the longer of the two otherwise.
pub fn mixup_with<F: Scalar>(a: &Batch<F>, b: &Batch<F>, lambdas: &[f64]) -> Result<Batch<F>> {
    let n = a.len();
    if a.inputs.shape() != b.inputs.shape() || a.targets.shape() != b.targets.shape() || lambdas.len() != n {
        return Err(TensorError::ShapeMismatch {
            op: "mixup",
            detail: format!(
                "inputs {:?}/{:?}, targets {:?}/{:?}, {} weights",
                a.inputs.shape(),
                b.inputs.shape(),
                a.targets.shape(),
                b.targets.shape(),
                lambdas.len()
            ),
        }
        .into());
    }
    let xs = a.inputs.len() / n;
    let ys = a.targets.len() / n;
    let mut x = Vec::with_capacity(a.inputs.len());
    let mut y = Vec::with_capacity(a.targets.len());
    let mut valid_len = Vec::with_capacity(n);
    for (i, &l) in lambdas.iter().enumerate() {
        x.extend(mix_pair(
            &a.inputs.data()[i * xs..][..xs],
            &b.inputs.data()[i * xs..][..xs],
            l,
        ));
        y.extend(mix_pair(
            &a.targets.data()[i * ys..][..ys],
            &b.targets.data()[i * ys..][..ys],
            l,
        ));
        valid_len.push(if l >= 1.0 {
            a.valid_len[i]
        } else if l <= 0.0 {
            b.valid_len[i]
        } else {
            a.valid_len[i].max(b.valid_len[i])
        });
    }
    Ok(Batch {
        inputs: Tensor::new(a.inputs.shape().to_vec(), x)?,
        targets: Tensor::new(a.targets.shape().to_vec(), y)?,
        valid_len,
    })
}

/// MixUp with one `λ ~ Beta(alpha, alpha)` per sample pair; returns the
/// mixed batch and the weights drawn.
pub fn mixup<F: Scalar, R: Rng + ?Sized>(
    a: &Batch<F>,
    b: &Batch<F>,
    alpha: f64,
    rng: &mut R,
) -> Result<(Batch<F>, Vec<f64>)> {
    let lambdas = (0..a.len())
        .map(|_| sample_lambda(alpha, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((mixup_with(a, b, &lambdas)?, lambdas))
}
