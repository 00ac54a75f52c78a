use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, TrainError};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Side of the square crop taken from every frame.
    pub crop: usize,
    /// Random crop position in training (center crop otherwise).
    pub random_crop: bool,
    /// Probability of a horizontal flip in training.
    pub flip_prob: f64,
    /// Train on a random contiguous sub-sequence of `⌈T/2⌉..=T` frames.
    pub variable_length: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            crop: 88,
            random_crop: true,
            flip_prob: 0.5,
            variable_length: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Augmented<F> {
    /// `[C, T, crop, crop]`; frames past `valid_len` are zero.
    pub frames: Tensor<F>,
    pub valid_len: usize,
}

fn dims(seq: &Tensor<impl Scalar>) -> Result<[usize; 4]> {
    match *seq.shape() {
        [c, t, h, w] => Ok([c, t, h, w]),
        ref s => Err(TensorError::ShapeMismatch {
            op: "augment",
            detail: format!("expected [C, T, H, W], got {s:?}"),
        }
        .into()),
    }
}

/// Square window of side `size` at `(top, left)` of every frame.
pub fn crop_at<F: Scalar>(seq: &Tensor<F>, top: usize, left: usize, size: usize) -> Result<Tensor<F>> {
    let [c, t, h, w] = dims(seq)?;
    if top + size > h || left + size > w {
        return Err(TrainError::CropTooLarge {
            crop: size,
            size: h.min(w),
        });
    }
    let mut out = Vec::with_capacity(c * t * size * size);
    for plane in 0..c * t {
        let base = plane * h * w;
        for y in top..top + size {
            out.extend_from_slice(&seq.data()[base + y * w + left..][..size]);
        }
    }
    Ok(Tensor::new(alloc::vec![c, t, size, size], out)?)
}

pub fn center_crop<F: Scalar>(seq: &Tensor<F>, size: usize) -> Result<Tensor<F>> {
    let [_, _, h, w] = dims(seq)?;
    if size > h || size > w {
        return Err(TrainError::CropTooLarge {
            crop: size,
            size: h.min(w),
        });
    }
    crop_at(seq, (h - size) / 2, (w - size) / 2, size)
}

/// Mirrors every frame left to right.
pub fn hflip<F: Scalar>(seq: &Tensor<F>) -> Result<Tensor<F>> {
    let [_, _, _, w] = dims(seq)?;
    let mut out = seq.data().to_vec();
    for row in out.chunks_mut(w) {
        row.reverse();
    }
    Ok(Tensor::new(seq.shape().to_vec(), out)?)
}

/// Shortest sub-sequence kept by variable-length augmentation.
pub fn min_length(frames: usize) -> usize {
    frames.div_ceil(2)
}

/// Moves frames `[start, start + len)` to the front and zeroes the rest.
fn keep_window<F: Scalar>(seq: Tensor<F>, start: usize, len: usize) -> Tensor<F> {
    let shape = seq.shape().to_vec();
    let (t, frame) = (shape[1], shape[2] * shape[3]);
    let mut data = seq.into_data();
    for plane in data.chunks_mut(t * frame) {
        plane.copy_within(start * frame..(start + len) * frame, 0);
        plane[len * frame..].fill(F::zero());
    }
    Tensor::from_parts(shape, data)
}

/// Training: random `crop` window, horizontal flip with `flip_prob`, and a
/// random contiguous sub-sequence of `k ~ U{⌈T/2⌉..=T}` frames moved to the
/// front (`valid_len = k`). Evaluation: center crop at full length.
pub fn augment<F: Scalar, R: Rng + ?Sized>(
    seq: &Tensor<F>,
    cfg: &AugmentConfig,
    rng: &mut R,
    train: bool,
) -> Result<Augmented<F>> {
    let [_, t, h, w] = dims(seq)?;
    if cfg.crop > h || cfg.crop > w || cfg.crop == 0 {
        return Err(TrainError::CropTooLarge {
            crop: cfg.crop,
            size: h.min(w),
        });
    }
    if !train {
        return Ok(Augmented {
            frames: center_crop(seq, cfg.crop)?,
            valid_len: t,
        });
    }
    let mut frames = if cfg.random_crop {
        let top = rng.random_range(0..=h - cfg.crop);
        let left = rng.random_range(0..=w - cfg.crop);
        crop_at(seq, top, left, cfg.crop)?
    } else {
        center_crop(seq, cfg.crop)?
    };
    if cfg.flip_prob > 0.0 && rng.random::<f64>() < cfg.flip_prob {
        frames = hflip(&frames)?;
    }
    let mut valid_len = t;
    if cfg.variable_length {
        let k = rng.random_range(min_length(t)..=t);
        let start = rng.random_range(0..=t - k);
        frames = keep_window(frames, start, k);
        valid_len = k;
    }
    Ok(Augmented { frames, valid_len })
}
