//! Layout operations: concat, chunk and axis permutation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

/// `(outer, axis, inner)` extents around `axis`.
pub(crate) fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(TensorError::AxisOutOfRange {
            op,
            axis,
            rank: shape.len(),
        });
    }
    Ok(())
}

pub fn concat<F: Scalar>(parts: &[&Tensor<F>], axis: usize) -> Result<Tensor<F>> {
    let first = parts.first().ok_or(TensorError::ShapeMismatch {
        op: "concat",
        detail: "no inputs".into(),
    })?;
    check_axis("concat", first.shape(), axis)?;
    let mut total = 0;
    for p in parts {
        let same_rank = p.rank() == first.rank();
        let same_other = same_rank
            && p.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !same_other {
            return Err(TensorError::ShapeMismatch {
                op: "concat",
                detail: format!("{:?} vs {:?} along axis {axis}", p.shape(), first.shape()),
            });
        }
        total += p.shape()[axis];
    }
    let (outer, _, inner) = split_at_axis(first.shape(), axis);
    let mut data = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for p in parts {
            let a = p.shape()[axis];
            data.extend_from_slice(&p.data()[o * a * inner..(o + 1) * a * inner]);
        }
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = total;
    Ok(Tensor::from_parts(shape, data))
}

/// Contiguous slice `[start, start + len)` along `axis`.
pub fn narrow<F: Scalar>(input: &Tensor<F>, axis: usize, start: usize, len: usize) -> Result<Tensor<F>> {
    check_axis("narrow", input.shape(), axis)?;
    let (outer, a, inner) = split_at_axis(input.shape(), axis);
    if len == 0 || start + len > a {
        return Err(TensorError::ShapeMismatch {
            op: "narrow",
            detail: format!("[{start}, {}) outside axis of size {a}", start + len),
        });
    }
    let mut data = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = (o * a + start) * inner;
        data.extend_from_slice(&input.data()[base..base + len * inner]);
    }
    let mut shape = input.shape().to_vec();
    shape[axis] = len;
    Ok(Tensor::from_parts(shape, data))
}

/// Splits `axis` into `parts` equal pieces.
pub fn chunk<F: Scalar>(input: &Tensor<F>, parts: usize, axis: usize) -> Result<Vec<Tensor<F>>> {
    check_axis("chunk", input.shape(), axis)?;
    let size = input.shape()[axis];
    if parts == 0 || !size.is_multiple_of(parts) {
        return Err(TensorError::Divisibility {
            op: "chunk",
            size,
            parts,
        });
    }
    let len = size / parts;
    (0..parts).map(|i| narrow(input, axis, i * len, len)).collect()
}

pub(crate) fn check_perm(op: &'static str, rank: usize, perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; rank];
    if perm.len() != rank {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("permutation {perm:?} for rank {rank}"),
        });
    }
    for &p in perm {
        if p >= rank || seen[p] {
            return Err(TensorError::ShapeMismatch {
                op,
                detail: format!("invalid permutation {perm:?}"),
            });
        }
        seen[p] = true;
    }
    Ok(())
}

/// Reorders axes so that output axis `i` is input axis `perm[i]`.
pub fn permute<F: Scalar>(input: &Tensor<F>, perm: &[usize]) -> Result<Tensor<F>> {
    let rank = input.rank();
    check_perm("permute", rank, perm)?;
    let in_shape = input.shape();
    let mut in_strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut idx = vec![0usize; rank];
    let mut data = Vec::with_capacity(input.len());
    let src = input.data();
    for _ in 0..input.len() {
        let off: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        data.push(src[off]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            if idx[ax] < out_shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    Ok(Tensor::from_parts(out_shape, data))
}

pub(crate) fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}
