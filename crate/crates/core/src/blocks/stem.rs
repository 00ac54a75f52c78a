use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::layers::{LayerFactory, LayerRef, Unit};
use super::{BlockError, Result};
use crate::autograd::Var;
use crate::ops::{Activation, ConvSpec, Padding};
use crate::params::{ParamId, Session};
use crate::scalar::Scalar;

/// 3-D convolution over `(time, height, width)` followed by BN and ReLU.
/// No pooling follows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StemSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

impl Default for StemSpec {
    fn default() -> Self {
        StemSpec {
            in_channels: 1,
            out_channels: 32,
            kernel: [3, 5, 5],
            stride: [1, 2, 2],
            padding: [1, 2, 2],
        }
    }
}

impl StemSpec {
    pub fn conv_spec(&self) -> ConvSpec {
        ConvSpec {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            kernel: self.kernel.to_vec(),
            stride: self.stride.to_vec(),
            dilation: vec![1; 3],
            groups: 1,
            padding: Padding::Symmetric(self.padding.to_vec()),
        }
    }

    /// Temporal length must be preserved so frames stay aligned with the TCN.
    pub fn validate(&self) -> Result<()> {
        self.conv_spec().validate()?;
        if self.stride[0] != 1 || 2 * self.padding[0] + 1 != self.kernel[0] {
            return Err(BlockError::StemInput(format!(
                "temporal kernel {} with stride {} and padding {} does not preserve length",
                self.kernel[0], self.stride[0], self.padding[0]
            )));
        }
        Ok(())
    }

    /// Output `(T, H, W)` for an input `(T, H, W)`, checking the input
    /// contract: at least `kernel_t` frames, even height and width, and
    /// padded extents no smaller than the kernel.
    pub fn output_extent(&self, t: usize, h: usize, w: usize) -> Result<[usize; 3]> {
        if t < self.kernel[0] {
            return Err(BlockError::StemInput(format!(
                "needs at least {} frames, got {t}",
                self.kernel[0]
            )));
        }
        for (axis, n) in [(1, h), (2, w)] {
            if n % 2 != 0 {
                return Err(BlockError::StemInput(format!("spatial size {n} must be even")));
            }
            if n + 2 * self.padding[axis] < self.kernel[axis] {
                return Err(BlockError::StemInput(format!(
                    "spatial size {n} too small for kernel {}",
                    self.kernel[axis]
                )));
            }
        }
        let out = self.conv_spec().output_spatial(&[t, h, w])?;
        Ok([out[0], out[1], out[2]])
    }

    /// Frames of look-ahead (and look-back) the stem adds around each frame.
    pub fn temporal_half_extent(&self) -> usize {
        self.kernel[0] / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stem {
    pub spec: StemSpec,
    pub unit: Unit,
}

impl Stem {
    pub fn new<F: Scalar>(factory: &mut LayerFactory<'_, F>, name: &str, spec: StemSpec) -> Result<Self> {
        spec.validate()?;
        let unit = factory.unit(name, spec.conv_spec(), false, true, Some(Activation::Relu))?;
        Ok(Stem { spec, unit })
    }

    /// `[N, Cin, T, H, W]` → `[N, 32, T, H/2, W/2]`.
    pub fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> Result<Var> {
        let shape = s.tape.shape(x)?.to_vec();
        let &[_, c, t, h, w] = shape.as_slice() else {
            return Err(BlockError::StemInput(format!("must be [N, C, T, H, W], got {shape:?}")));
        };
        if c != self.spec.in_channels {
            return Err(BlockError::StemInput(format!(
                "has {c} channels, stem expects {}",
                self.spec.in_channels
            )));
        }
        self.spec.output_extent(t, h, w)?;
        Ok(self.unit.forward(s, x)?)
    }

    pub fn layers(&self) -> Vec<LayerRef<'_>> {
        self.unit.layers().collect()
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers().iter().flat_map(LayerRef::params).collect()
    }

    pub fn param_count(&self) -> u64 {
        self.unit.param_count()
    }
}
