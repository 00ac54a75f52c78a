//! Reference per-frame feature extractor: stages of 2-D inverted-residual
//! blocks (the first block of each stage downsamples by 2), a point-wise head
//! and a spatial average. Frames are folded into the batch axis, so no
//! temporal mixing happens here.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::layers::{LayerFactory, LayerRef, Unit};
use super::{BlockError, Result};
use crate::autograd::Var;
use crate::ops::{Activation, ConvSpec};
use crate::params::{ParamId, Session};
use crate::scalar::Scalar;
use crate::tensor::TensorError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorSpec {
    /// Output width of each stage.
    pub widths: Vec<usize>,
    pub blocks_per_stage: usize,
    /// Channel multiplier inside each inverted-residual block.
    pub expansion: usize,
    /// Feature dimension per frame.
    pub out_dim: usize,
}

impl Default for ExtractorSpec {
    fn default() -> Self {
        ExtractorSpec {
            widths: vec![32, 64, 128, 256],
            blocks_per_stage: 1,
            expansion: 4,
            out_dim: 512,
        }
    }
}

impl ExtractorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(BlockError::StemInput(format!("extractor {what}")));
        if self.widths.is_empty() {
            return bad("needs at least one stage");
        }
        if self.widths.contains(&0) || self.blocks_per_stage == 0 || self.expansion == 0 || self.out_dim == 0 {
            return bad("sizes must be positive");
        }
        Ok(())
    }

    /// Spatial extent after every stage for a square input of side `size`,
    /// failing if a downsampling stage would start below 2.
    pub fn stage_sizes(&self, size: usize) -> Result<Vec<usize>> {
        let mut n = size;
        let mut out = Vec::with_capacity(self.widths.len());
        for stage in 0..self.widths.len() {
            if n < 2 {
                return Err(BlockError::SpatialExhausted { stage, size: n });
            }
            n = (n - 1) / 2 + 1;
            out.push(n);
        }
        Ok(out)
    }

    /// Parameter count from the block formulas, for an input of `in_channels`.
    pub fn closed_form_params(&self, in_channels: usize) -> u64 {
        let mut cin = in_channels as u64;
        let mut total = 0;
        for &w in &self.widths {
            let w = w as u64;
            for _ in 0..self.blocks_per_stage {
                let e = cin * self.expansion as u64;
                total += cin * e + 2 * e + 9 * e + 2 * e + e * w + 2 * w;
                cin = w;
            }
        }
        total + cin * self.out_dim as u64 + 2 * self.out_dim as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrBlock2d {
    pub expand: Unit,
    pub dw: Unit,
    pub project: Unit,
    pub residual: bool,
}

impl IrBlock2d {
    fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> core::result::Result<Var, TensorError> {
        let y = self.expand.forward(s, x)?;
        let y = self.dw.forward(s, y)?;
        let y = self.project.forward(s, y)?;
        if self.residual {
            s.tape.add(x, y)
        } else {
            Ok(y)
        }
    }

    fn units(&self) -> [&Unit; 3] {
        [&self.expand, &self.dw, &self.project]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extractor {
    pub spec: ExtractorSpec,
    pub in_channels: usize,
    pub blocks: Vec<IrBlock2d>,
    pub head: Unit,
}

impl Extractor {
    pub fn new<F: Scalar>(
        factory: &mut LayerFactory<'_, F>,
        name: &str,
        spec: ExtractorSpec,
        in_channels: usize,
    ) -> Result<Self> {
        spec.validate()?;
        let relu = Some(Activation::Relu);
        let mut blocks = Vec::new();
        let mut cin = in_channels;
        for (si, &w) in spec.widths.iter().enumerate() {
            for bi in 0..spec.blocks_per_stage {
                let p = format!("{name}.s{si}.b{bi}");
                let stride = if bi == 0 { 2 } else { 1 };
                let e = cin * spec.expansion;
                let expand = factory.unit(
                    &format!("{p}.expand"),
                    ConvSpec::same2d(cin, e, 1, 1, 1),
                    false,
                    true,
                    relu,
                )?;
                let dw = factory.unit(
                    &format!("{p}.dw"),
                    ConvSpec::same2d(e, e, 3, stride, e),
                    false,
                    true,
                    relu,
                )?;
                let project = factory.unit(
                    &format!("{p}.project"),
                    ConvSpec::same2d(e, w, 1, 1, 1),
                    false,
                    true,
                    None,
                )?;
                blocks.push(IrBlock2d {
                    expand,
                    dw,
                    project,
                    residual: stride == 1 && cin == w,
                });
                cin = w;
            }
        }
        let head = factory.unit(
            &format!("{name}.head"),
            ConvSpec::same2d(cin, spec.out_dim, 1, 1, 1),
            false,
            true,
            relu,
        )?;
        Ok(Extractor {
            spec,
            in_channels,
            blocks,
            head,
        })
    }

    /// `[N, C, T, H, W]` → `[N, D, T]`.
    pub fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> Result<Var> {
        let shape = s.tape.shape(x)?.to_vec();
        let &[n, c, t, h, w] = shape.as_slice() else {
            return Err(BlockError::StemInput(format!(
                "extractor input must be [N, C, T, H, W], got {shape:?}"
            )));
        };
        if c != self.in_channels {
            return Err(TensorError::ShapeMismatch {
                op: "extractor",
                detail: format!("{c} channels, expected {}", self.in_channels),
            }
            .into());
        }
        self.spec.stage_sizes(h.min(w))?;
        let y = s.tape.permute(x, &[0, 2, 1, 3, 4])?;
        let mut y = s.tape.reshape(y, &[n * t, c, h, w])?;
        for b in &self.blocks {
            y = b.forward(s, y)?;
        }
        let y = self.head.forward(s, y)?;
        let y = s.tape.mean_axes(y, &[2, 3])?;
        let y = s.tape.reshape(y, &[n, t, self.spec.out_dim])?;
        Ok(s.tape.permute(y, &[0, 2, 1])?)
    }

    /// MACs for `frames` frames of size `h × w` (input to the first stage).
    pub fn macs(&self, frames: usize, h: usize, w: usize) -> Result<(u64, [usize; 2])> {
        self.spec.stage_sizes(h.min(w))?;
        let mut spatial = vec![h, w];
        let mut per_frame = 0;
        for b in &self.blocks {
            for u in b.units() {
                let (m, out) = u.macs(&spatial)?;
                per_frame += m;
                spatial = out;
            }
        }
        per_frame += self.head.macs(&spatial)?.0;
        Ok((per_frame * frames as u64, [spatial[0], spatial[1]]))
    }

    pub fn layers(&self) -> Vec<LayerRef<'_>> {
        self.blocks
            .iter()
            .flat_map(|b| b.units())
            .chain(core::iter::once(&self.head))
            .flat_map(Unit::layers)
            .collect()
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers().iter().flat_map(LayerRef::params).collect()
    }

    pub fn param_count(&self) -> u64 {
        self.layers().iter().map(LayerRef::param_count).sum()
    }
}
