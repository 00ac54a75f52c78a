//! Synthetic sequence classification data.
//!
//! Class `c` is a spatio-temporal motif: spatial profile `c % 5` (a smooth,
//! left-right symmetric cosine pattern) modulated over four consecutive
//! frames by temporal sign code `c / 5` (a Walsh sequence). Each sample
//! places its class motif at a random onset on a zero background and adds
//! Gaussian noise. A sample is a pure function of the seed and its global
//! index; labels cycle through the classes by index.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Result, TrainError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const PROFILES: [(f64, f64); 5] = [(1.0, 0.0), (2.0, 0.0), (0.0, 1.0), (1.0, 1.0), (3.0, 0.0)];
const CODES: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
];

/// Frames spanned by one motif.
pub const MOTIF_FRAMES: usize = 4;
/// Distinct motifs available.
pub const MOTIF_CAPACITY: usize = PROFILES.len() * CODES.len();

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Labelled sequences `[C, T, H, W]` addressed by split and index.
pub trait SequenceDataset<F: Scalar> {
    fn num_classes(&self) -> usize;
    fn len(&self, split: Split) -> usize;
    fn sample(&self, split: Split, index: usize) -> Result<(Tensor<F>, usize)>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyDatasetSpec {
    pub num_classes: usize,
    pub frames: usize,
    /// Side of the generated (pre-crop) frames.
    pub frame_size: usize,
    pub amplitude: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        ToyDatasetSpec {
            num_classes: 10,
            frames: 12,
            frame_size: 10,
            amplitude: 1.0,
            noise: 0.5,
            train: 200,
            val: 50,
            test: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDataset {
    spec: ToyDatasetSpec,
}

impl ToyDataset {
    pub fn new(spec: ToyDatasetSpec) -> Result<Self> {
        if spec.num_classes > MOTIF_CAPACITY {
            return Err(TrainError::MotifCapacity {
                classes: spec.num_classes,
                capacity: MOTIF_CAPACITY,
            });
        }
        if spec.num_classes < 2 || spec.frame_size == 0 || spec.frames < MOTIF_FRAMES {
            return Err(TrainError::InvalidConfig(alloc::format!(
                "toy dataset needs ≥ 2 classes, ≥ {MOTIF_FRAMES} frames and a positive frame size"
            )));
        }
        if !(spec.noise >= 0.0 && spec.noise.is_finite() && spec.amplitude.is_finite()) {
            return Err(TrainError::InvalidConfig("noise must be finite and nonnegative".into()));
        }
        Ok(ToyDataset { spec })
    }

    pub fn spec(&self) -> &ToyDatasetSpec {
        &self.spec
    }

    /// Position of a sample in the concatenation train ++ val ++ test.
    pub fn global_index(&self, split: Split, index: usize) -> usize {
        match split {
            Split::Train => index,
            Split::Val => self.spec.train + index,
            Split::Test => self.spec.train + self.spec.val + index,
        }
    }

    pub fn label(&self, global: usize) -> usize {
        global % self.spec.num_classes
    }

    /// Noise-free motif of `class`, `[MOTIF_FRAMES, R, R]` flattened.
    pub fn template(&self, class: usize) -> Vec<f64> {
        let r = self.spec.frame_size;
        let (m, n) = PROFILES[class % PROFILES.len()];
        let code = CODES[class / PROFILES.len()];
        let pi = core::f64::consts::PI;
        let centre = (r as f64 - 1.0) / 2.0;
        let mut out = Vec::with_capacity(MOTIF_FRAMES * r * r);
        for s in code {
            for y in 0..r {
                for x in 0..r {
                    let py = num_traits::Float::cos(pi * m * (y as f64 + 0.5) / r as f64);
                    let px = num_traits::Float::cos(2.0 * pi * n * (x as f64 - centre) / r as f64);
                    out.push(self.spec.amplitude * s * py * px);
                }
            }
        }
        out
    }

    /// Sample with its motif onset, `[1, T, R, R]`.
    pub fn generate<F: Scalar>(&self, global: usize) -> Result<(Tensor<F>, usize, usize)> {
        let sp = &self.spec;
        let r = sp.frame_size;
        let frame = r * r;
        let label = self.label(global);
        let mut rng = ChaCha8Rng::seed_from_u64(sp.seed);
        rng.set_stream(global as u64);
        let onset = rng.random_range(0..=sp.frames - MOTIF_FRAMES);
        let mut data = vec![0.0f64; sp.frames * frame];
        data[onset * frame..(onset + MOTIF_FRAMES) * frame].copy_from_slice(&self.template(label));
        if sp.noise > 0.0 {
            let normal = Normal::new(0.0, sp.noise).map_err(|e| TrainError::InvalidConfig(alloc::format!("{e}")))?;
            for v in &mut data {
                *v += normal.sample(&mut rng);
            }
        }
        let t = Tensor::new(vec![1, sp.frames, r, r], data.into_iter().map(F::of).collect())?;
        Ok((t, label, onset))
    }
}

impl<F: Scalar> SequenceDataset<F> for ToyDataset {
    fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    fn len(&self, split: Split) -> usize {
        match split {
            Split::Train => self.spec.train,
            Split::Val => self.spec.val,
            Split::Test => self.spec.test,
        }
    }

    fn sample(&self, split: Split, index: usize) -> Result<(Tensor<F>, usize)> {
        let n = <Self as SequenceDataset<F>>::len(self, split);
        if index >= n {
            return Err(TrainError::InvalidConfig(alloc::format!(
                "index {index} out of range for {split:?} split of {n}"
            )));
        }
        let (t, label, _) = self.generate(self.global_index(split, index))?;
        Ok((t, label))
    }
}
