//! Reductions, the affine map and softmax.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ops::shape::split_at_axis;
use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

/// Arithmetic mean over `axes`; reduced axes are removed from the shape
/// (a full reduction yields shape `[1]`).
pub fn mean_axes<F: Scalar>(input: &Tensor<F>, axes: &[usize]) -> Result<Tensor<F>> {
    let rank = input.rank();
    let mut reduce = vec![false; rank];
    for &a in axes {
        if a >= rank {
            return Err(TensorError::AxisOutOfRange {
                op: "mean",
                axis: a,
                rank,
            });
        }
        reduce[a] = true;
    }
    if axes.is_empty() {
        return Ok(input.clone());
    }
    let shape = input.shape();
    let out_shape: Vec<usize> = (0..rank).filter(|&i| !reduce[i]).map(|i| shape[i]).collect();
    let out_shape = if out_shape.is_empty() { vec![1] } else { out_shape };
    let count: usize = (0..rank).filter(|&i| reduce[i]).map(|i| shape[i]).product();
    let mut out = vec![F::zero(); out_shape.iter().product()];
    for_each_reduced(shape, &reduce, |src, dst| out[dst] += input.data()[src]);
    let inv = F::one() / F::of(count as f64);
    for v in &mut out {
        *v *= inv;
    }
    Ok(Tensor::from_parts(out_shape, out))
}

/// Visits every flat source index with the flat index of the kept axes.
pub(crate) fn for_each_reduced(shape: &[usize], reduce: &[bool], mut f: impl FnMut(usize, usize)) {
    let rank = shape.len();
    let mut idx = vec![0usize; rank];
    let total: usize = shape.iter().product();
    for src in 0..total {
        let mut dst = 0;
        for ax in 0..rank {
            if !reduce[ax] {
                dst = dst * shape[ax] + idx[ax];
            }
        }
        f(src, dst);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

/// Mean over the last axis of `[N, C, T]` restricted to the first
/// `valid_len[n]` positions of each sample. Returns `[N, C]`.
pub fn masked_time_mean<F: Scalar>(input: &Tensor<F>, valid_len: &[usize]) -> Result<Tensor<F>> {
    let &[n, c, t] = input.shape() else {
        return Err(TensorError::ShapeMismatch {
            op: "masked_time_mean",
            detail: format!("expected [N, C, T], got {:?}", input.shape()),
        });
    };
    check_lengths(valid_len, n, t)?;
    let x = input.data();
    let mut out = vec![F::zero(); n * c];
    for b in 0..n {
        let inv = F::one() / F::of(valid_len[b] as f64);
        for ch in 0..c {
            let row = &x[(b * c + ch) * t..][..valid_len[b]];
            let mut s = F::zero();
            for &v in row {
                s += v;
            }
            out[b * c + ch] = s * inv;
        }
    }
    Ok(Tensor::from_parts(vec![n, c], out))
}

pub(crate) fn check_lengths(valid_len: &[usize], n: usize, t: usize) -> Result<()> {
    if valid_len.len() != n {
        return Err(TensorError::ShapeMismatch {
            op: "masked_time_mean",
            detail: format!("{} lengths for batch {n}", valid_len.len()),
        });
    }
    if valid_len.contains(&0) {
        return Err(TensorError::EmptyReduction);
    }
    if let Some(&l) = valid_len.iter().find(|&&l| l > t) {
        return Err(TensorError::ShapeMismatch {
            op: "masked_time_mean",
            detail: format!("valid length {l} exceeds {t} frames"),
        });
    }
    Ok(())
}

pub fn sum<F: Scalar>(input: &Tensor<F>) -> Tensor<F> {
    let mut s = F::zero();
    for &v in input.data() {
        s += v;
    }
    Tensor::scalar(s)
}

/// `y = x W^T + b` for `x: [N, in]` (or `[in]`), `W: [out, in]`, `b: [out]`.
pub fn linear<F: Scalar>(input: &Tensor<F>, weight: &Tensor<F>, bias: Option<&Tensor<F>>) -> Result<Tensor<F>> {
    let (n, k) = match input.shape() {
        &[k] => (1, k),
        &[n, k] => (n, k),
        s => {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                detail: format!("input must be [in] or [N, in], got {s:?}"),
            })
        }
    };
    let &[out_f, in_f] = weight.shape() else {
        return Err(TensorError::ShapeMismatch {
            op: "linear",
            detail: format!("weight must be [out, in], got {:?}", weight.shape()),
        });
    };
    if in_f != k {
        return Err(TensorError::ShapeMismatch {
            op: "linear",
            detail: format!("input features {k} vs weight in {in_f}"),
        });
    }
    if let Some(b) = bias {
        if b.shape() != [out_f] {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                detail: format!("bias {:?} vs [{out_f}]", b.shape()),
            });
        }
    }
    let (x, w) = (input.data(), weight.data());
    let mut y = vec![F::zero(); n * out_f];
    for r in 0..n {
        let xr = &x[r * k..][..k];
        for o in 0..out_f {
            let wr = &w[o * k..][..k];
            let mut acc = bias.map_or(F::zero(), |b| b.data()[o]);
            for (&a, &b) in xr.iter().zip(wr) {
                acc += a * b;
            }
            y[r * out_f + o] = acc;
        }
    }
    let shape = if input.rank() == 1 { vec![out_f] } else { vec![n, out_f] };
    let out = Tensor::from_parts(shape, y);
    out.ensure_finite("linear")?;
    Ok(out)
}

fn softmax_impl<F: Scalar>(input: &Tensor<F>, axis: usize, log: bool) -> Result<Tensor<F>> {
    if axis >= input.rank() {
        return Err(TensorError::AxisOutOfRange {
            op: "softmax",
            axis,
            rank: input.rank(),
        });
    }
    let (outer, a, inner) = split_at_axis(input.shape(), axis);
    let x = input.data();
    let mut y = vec![F::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * a + j) * inner + i;
            let mut m = F::neg_infinity();
            for j in 0..a {
                m = m.max(x[at(j)]);
            }
            let mut s = F::zero();
            for j in 0..a {
                s += (x[at(j)] - m).exp();
            }
            let ls = s.ln();
            for j in 0..a {
                let z = x[at(j)] - m;
                y[at(j)] = if log { z - ls } else { z.exp() / s };
            }
        }
    }
    Ok(Tensor::from_parts(input.shape().to_vec(), y))
}

/// Softmax along `axis`, computed after subtracting the per-slice maximum.
pub fn softmax<F: Scalar>(input: &Tensor<F>, axis: usize) -> Result<Tensor<F>> {
    softmax_impl(input, axis, false)
}

pub fn log_softmax<F: Scalar>(input: &Tensor<F>, axis: usize) -> Result<Tensor<F>> {
    softmax_impl(input, axis, true)
}
