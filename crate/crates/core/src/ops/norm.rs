//! Batch normalization over `[N, C, *]` inputs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

/// Running-statistics momentum.
pub const BN_MOMENTUM: f64 = 0.1;
/// Variance floor added before the square root.
pub const BN_EPS: f64 = 1e-5;

/// Result of a batch-norm forward pass.
#[derive(Clone, Debug)]
pub struct BatchNormOutput<F> {
    pub output: Tensor<F>,
    /// Updated `(running_mean, running_var)`; present in training mode only.
    pub running: Option<(Tensor<F>, Tensor<F>)>,
}

/// Per-channel view of an `[N, C, *]` tensor.
pub(crate) struct ChannelLayout {
    pub batch: usize,
    pub channels: usize,
    pub inner: usize,
}

impl ChannelLayout {
    pub fn of(shape: &[usize], op: &'static str) -> Result<Self> {
        if shape.len() < 2 {
            return Err(TensorError::ShapeMismatch {
                op,
                detail: format!("expected [N, C, ...], got {shape:?}"),
            });
        }
        Ok(ChannelLayout {
            batch: shape[0],
            channels: shape[1],
            inner: shape[2..].iter().product(),
        })
    }

    pub fn count(&self) -> usize {
        self.batch * self.inner
    }

    /// Calls `f(flat_index)` for every element of channel `c`.
    #[inline]
    pub fn for_channel(&self, c: usize, mut f: impl FnMut(usize)) {
        for n in 0..self.batch {
            let base = (n * self.channels + c) * self.inner;
            for i in base..base + self.inner {
                f(i);
            }
        }
    }
}

fn check_param<F: Scalar>(p: &Tensor<F>, channels: usize, what: &str) -> Result<()> {
    if p.shape() != [channels] {
        return Err(TensorError::ShapeMismatch {
            op: "batch_norm",
            detail: format!("{what} has shape {:?}, expected [{channels}]", p.shape()),
        });
    }
    Ok(())
}

/// Batch statistics used by the training-mode backward pass.
pub(crate) struct BatchStats<F> {
    pub mean: Vec<F>,
    pub inv_std: Vec<F>,
}

pub(crate) fn batch_stats<F: Scalar>(input: &Tensor<F>, eps: F) -> Result<(BatchStats<F>, Vec<F>)> {
    let l = ChannelLayout::of(input.shape(), "batch_norm")?;
    let x = input.data();
    let m = F::of(l.count() as f64);
    let mut mean = vec![F::zero(); l.channels];
    let mut var = vec![F::zero(); l.channels];
    let mut inv_std = vec![F::zero(); l.channels];
    for c in 0..l.channels {
        let mut s = F::zero();
        l.for_channel(c, |i| s += x[i]);
        let mu = s / m;
        let mut v = F::zero();
        l.for_channel(c, |i| {
            let d = x[i] - mu;
            v += d * d;
        });
        let v = v / m;
        if (v + eps).partial_cmp(&F::zero()) != Some(core::cmp::Ordering::Greater) {
            return Err(TensorError::NonPositiveVariance { channel: c });
        }
        mean[c] = mu;
        var[c] = v;
        inv_std[c] = F::one() / (v + eps).sqrt();
    }
    Ok((BatchStats { mean, inv_std }, var))
}

/// Normalizes `input` per channel.
///
/// Inference mode uses the running statistics. Training mode uses the batch
/// mean and biased variance, and returns running statistics blended with
/// momentum [`BN_MOMENTUM`] (the unbiased batch variance is blended in).
pub fn batch_norm<F: Scalar>(
    input: &Tensor<F>,
    gamma: &Tensor<F>,
    beta: &Tensor<F>,
    running_mean: &Tensor<F>,
    running_var: &Tensor<F>,
    eps: F,
    training: bool,
) -> Result<BatchNormOutput<F>> {
    let l = ChannelLayout::of(input.shape(), "batch_norm")?;
    for (p, what) in [
        (gamma, "gamma"),
        (beta, "beta"),
        (running_mean, "running_mean"),
        (running_var, "running_var"),
    ] {
        check_param(p, l.channels, what)?;
    }
    input.ensure_finite("batch_norm")?;
    let x = input.data();
    let mut y = vec![F::zero(); x.len()];
    let running;
    if training {
        let (stats, var) = batch_stats(input, eps)?;
        for c in 0..l.channels {
            let (g, b) = (gamma.data()[c], beta.data()[c]);
            let (mu, is) = (stats.mean[c], stats.inv_std[c]);
            l.for_channel(c, |i| y[i] = g * (x[i] - mu) * is + b);
        }
        let mom = F::of(BN_MOMENTUM);
        let m = l.count() as f64;
        let unbias = if m > 1.0 { F::of(m / (m - 1.0)) } else { F::one() };
        let rm = running_mean
            .data()
            .iter()
            .zip(&stats.mean)
            .map(|(&r, &b)| (F::one() - mom) * r + mom * b)
            .collect();
        let rv = running_var
            .data()
            .iter()
            .zip(&var)
            .map(|(&r, &v)| (F::one() - mom) * r + mom * v * unbias)
            .collect();
        running = Some((
            Tensor::from_parts(vec![l.channels], rm),
            Tensor::from_parts(vec![l.channels], rv),
        ));
    } else {
        for c in 0..l.channels {
            let v = running_var.data()[c] + eps;
            if v.partial_cmp(&F::zero()) != Some(core::cmp::Ordering::Greater) {
                return Err(TensorError::NonPositiveVariance { channel: c });
            }
            let scale = gamma.data()[c] / v.sqrt();
            let (mu, b) = (running_mean.data()[c], beta.data()[c]);
            l.for_channel(c, |i| y[i] = scale * (x[i] - mu) + b);
        }
        running = None;
    }
    let output = Tensor::from_parts(input.shape().to_vec(), y);
    output.ensure_finite("batch_norm")?;
    Ok(BatchNormOutput { output, running })
}
