//! Temporal blocks: 1-D causal convolution bodies wrapped in a residual
//! connection, `y = x + dropout(body(x))`.
//!
//! Layer sequences (`C` block width, `E` expanded width, `k` TCN kernel,
//! `kd` depth-wise kernel, `d` dilation; every conv causal with dilation `d`):
//!
//! | kind      | body                                                                        |
//! |-----------|-----------------------------------------------------------------------------|
//! | baseline  | [conv k C→C +bias, BN, relu] ×2                                             |
//! | linear    | dw kd, BN → pw C→C, BN, relu → dw kd, BN                                    |
//! | fusedmb   | conv k C→E, BN, relu → pw E→C, BN                                           |
//! | inv. res. | pw C→E, BN, relu → dw kd E, BN, relu → pw E→C, BN                           |
//! | cib       | dw kd C, BN, relu → pw C→E, BN, relu → dw kd E, BN, relu → pw E→C, BN, relu → dw kd C, BN |
//! | uib       | dw kd C, BN → pw C→E, BN, relu → dw kd E, BN, relu → pw E→C, BN             |
//! | star      | dw kd C +bias, BN → x1, x2 = pw C→E +bias → mix → pw E→C +bias, BN → dw kd C +bias |
//!
//! Star mixing: V `relu6(x1)·x2`; I `relu6(x1·x2)`; II `relu6(x1)·relu6(x2)`;
//! III as V with an extra pw C→C (+bias) between the first depth-wise conv and
//! the branches; IV as V with a BN after the final depth-wise conv. Convs that
//! feed a BN carry no bias, except in the baseline and star blocks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::kind::{BlockKind, BlockSpec};
use super::layers::{ConvLayer, LayerFactory, LayerRef, Unit};
use super::Result;
use crate::autograd::Var;
use crate::ops::{Activation, ConvSpec};
use crate::params::{ParamId, Session};
use crate::scalar::Scalar;
use crate::tensor::TensorError;

#[derive(Clone, Debug, PartialEq)]
pub struct StarBody {
    pub dw1: Unit,
    pub f1: ConvLayer,
    pub f2: ConvLayer,
    /// Extra point-wise conv ahead of the branches (variant III).
    pub extra: Option<ConvLayer>,
    pub g: Unit,
    pub dw2: Unit,
}

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum TemporalBody {
    Chain(Vec<Unit>),
    Star(StarBody),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalBlock {
    pub name: String,
    pub spec: BlockSpec,
    pub channels: usize,
    pub expanded: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub dropout: f64,
    pub body: TemporalBody,
}

const RELU: Option<Activation> = Some(Activation::Relu);

impl TemporalBlock {
    pub fn new<F: Scalar>(
        factory: &mut LayerFactory<'_, F>,
        name: &str,
        spec: BlockSpec,
        channels: usize,
        kernel: usize,
        dilation: usize,
        dropout: f64,
    ) -> Result<Self> {
        spec.validate(channels)?;
        let (c, e, kd, d) = (channels, spec.expanded(channels)?, spec.dw_kernel, dilation);
        let full = |cin, cout, k| ConvSpec::causal1d(cin, cout, k, d, 1);
        let dw = |ch| ConvSpec::depthwise1d(ch, kd, d);
        let pw = ConvSpec::pointwise1d;
        let mut u = |i: usize, spec: ConvSpec, bias: bool, act: Option<Activation>| {
            factory.unit(&format!("{name}.{i}"), spec, bias, true, act)
        };
        let body = match spec.kind {
            BlockKind::BaselineTcn => TemporalBody::Chain(vec![
                u(0, full(c, c, kernel), true, RELU)?,
                u(1, full(c, c, kernel), true, RELU)?,
            ]),
            BlockKind::Linear => TemporalBody::Chain(vec![
                u(0, dw(c), false, None)?,
                u(1, pw(c, c), false, RELU)?,
                u(2, dw(c), false, None)?,
            ]),
            BlockKind::FusedMb => TemporalBody::Chain(vec![
                u(0, full(c, e, kernel), false, RELU)?,
                u(1, pw(e, c), false, None)?,
            ]),
            BlockKind::InvertedResidual => TemporalBody::Chain(vec![
                u(0, pw(c, e), false, RELU)?,
                u(1, dw(e), false, RELU)?,
                u(2, pw(e, c), false, None)?,
            ]),
            BlockKind::Cib => TemporalBody::Chain(vec![
                u(0, dw(c), false, RELU)?,
                u(1, pw(c, e), false, RELU)?,
                u(2, dw(e), false, RELU)?,
                u(3, pw(e, c), false, RELU)?,
                u(4, dw(c), false, None)?,
            ]),
            BlockKind::Uib => TemporalBody::Chain(vec![
                u(0, dw(c), false, None)?,
                u(1, pw(c, e), false, RELU)?,
                u(2, dw(e), false, RELU)?,
                u(3, pw(e, c), false, None)?,
            ]),
            kind => {
                let dw1 = factory.unit(&format!("{name}.dw1"), dw(c), true, true, None)?;
                let extra = if kind == BlockKind::StarIII {
                    Some(factory.conv(&format!("{name}.pw"), pw(c, c), true)?)
                } else {
                    None
                };
                let f1 = factory.conv(&format!("{name}.f1"), pw(c, e), true)?;
                let f2 = factory.conv(&format!("{name}.f2"), pw(c, e), true)?;
                let g = factory.unit(&format!("{name}.g"), pw(e, c), true, true, None)?;
                let dw2 = factory.unit(&format!("{name}.dw2"), dw(c), true, kind == BlockKind::StarIV, None)?;
                TemporalBody::Star(StarBody {
                    dw1,
                    f1,
                    f2,
                    extra,
                    g,
                    dw2,
                })
            }
        };
        Ok(TemporalBlock {
            name: name.into(),
            spec,
            channels,
            expanded: e,
            kernel,
            dilation,
            dropout,
            body,
        })
    }

    /// Parameter count from the layer-sequence formulas, without building.
    pub fn closed_form_params(spec: &BlockSpec, channels: usize, kernel: usize) -> Result<u64> {
        spec.validate(channels)?;
        let c = channels as u64;
        let e = spec.expanded(channels)? as u64;
        let k = kernel as u64;
        let kd = spec.dw_kernel as u64;
        let bn = |ch: u64| 2 * ch;
        let n = match spec.kind {
            BlockKind::BaselineTcn => 2 * (k * c * c + c) + 2 * bn(c),
            BlockKind::Linear => 2 * kd * c + c * c + 3 * bn(c),
            BlockKind::FusedMb => k * c * e + bn(e) + e * c + bn(c),
            BlockKind::InvertedResidual => c * e + bn(e) + kd * e + bn(e) + e * c + bn(c),
            BlockKind::Cib => 2 * (kd * c + bn(c)) + c * e + bn(e) + kd * e + bn(e) + e * c + bn(c),
            BlockKind::Uib => kd * c + bn(c) + c * e + bn(e) + kd * e + bn(e) + e * c + bn(c),
            kind => {
                let dw = kd * c + c;
                let mut n = dw + bn(c) + 2 * (c * e + e) + (e * c + c) + bn(c) + dw;
                if kind == BlockKind::StarIII {
                    n += c * c + c;
                }
                if kind == BlockKind::StarIV {
                    n += bn(c);
                }
                n
            }
        };
        Ok(n)
    }

    /// Multiply-accumulates per time step from the layer-sequence formulas.
    pub fn closed_form_macs_per_step(spec: &BlockSpec, channels: usize, kernel: usize) -> Result<u64> {
        spec.validate(channels)?;
        let c = channels as u64;
        let e = spec.expanded(channels)? as u64;
        let k = kernel as u64;
        let kd = spec.dw_kernel as u64;
        let n = match spec.kind {
            BlockKind::BaselineTcn => 2 * k * c * c,
            BlockKind::Linear => 2 * kd * c + c * c,
            BlockKind::FusedMb => k * c * e + e * c,
            BlockKind::InvertedResidual => 2 * c * e + kd * e,
            BlockKind::Cib => 2 * kd * c + 2 * c * e + kd * e,
            BlockKind::Uib => kd * c + 2 * c * e + kd * e,
            kind => {
                let mut n = 2 * kd * c + 3 * c * e;
                if kind == BlockKind::StarIII {
                    n += c * c;
                }
                n
            }
        };
        Ok(n)
    }

    /// Kernel sizes of the temporal (k > 1) convolutions along the residual
    /// branch, in execution order.
    pub fn temporal_kernels(spec: &BlockSpec, kernel: usize) -> Vec<usize> {
        let kd = spec.dw_kernel;
        let ks = match spec.kind {
            BlockKind::BaselineTcn => vec![kernel, kernel],
            BlockKind::Linear => vec![kd, kd],
            BlockKind::FusedMb => vec![kernel],
            BlockKind::InvertedResidual => vec![kd],
            BlockKind::Cib => vec![kd, kd, kd],
            BlockKind::Uib => vec![kd, kd],
            _ => vec![kd, kd],
        };
        ks.into_iter().filter(|&k| k > 1).collect()
    }

    /// Frames of past context one block adds: `Σ (k - 1) · d`.
    pub fn lookback(spec: &BlockSpec, kernel: usize, dilation: usize) -> usize {
        Self::temporal_kernels(spec, kernel)
            .iter()
            .map(|k| (k - 1) * dilation)
            .sum()
    }

    pub fn layers(&self) -> Vec<LayerRef<'_>> {
        match &self.body {
            TemporalBody::Chain(units) => units.iter().flat_map(Unit::layers).collect(),
            TemporalBody::Star(s) => {
                let mut v: Vec<LayerRef<'_>> = s.dw1.layers().collect();
                if let Some(x) = &s.extra {
                    v.push(LayerRef::Conv(x));
                }
                v.push(LayerRef::Conv(&s.f1));
                v.push(LayerRef::Conv(&s.f2));
                v.extend(s.g.layers());
                v.extend(s.dw2.layers());
                v
            }
        }
    }

    pub fn param_count(&self) -> u64 {
        self.layers().iter().map(LayerRef::param_count).sum()
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers().iter().flat_map(LayerRef::params).collect()
    }

    /// MACs for one sample of length `t`, summed over the constructed convs.
    pub fn macs(&self, t: usize) -> core::result::Result<u64, TensorError> {
        let mut total = 0;
        for l in self.layers() {
            if let LayerRef::Conv(c) = l {
                total += c.macs(&[t])?.0;
            }
        }
        Ok(total)
    }

    pub fn body_forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> core::result::Result<Var, TensorError> {
        match &self.body {
            TemporalBody::Chain(units) => {
                let mut y = x;
                for u in units {
                    y = u.forward(s, y)?;
                }
                Ok(y)
            }
            TemporalBody::Star(b) => {
                let mut a = b.dw1.forward(s, x)?;
                if let Some(extra) = &b.extra {
                    a = extra.forward(s, a)?;
                }
                let x1 = b.f1.forward(s, a)?;
                let x2 = b.f2.forward(s, a)?;
                let mixed = match self.spec.kind {
                    BlockKind::StarI => {
                        let m = s.tape.hadamard(x1, x2)?;
                        s.tape.relu6(m)?
                    }
                    BlockKind::StarII => {
                        let a1 = s.tape.relu6(x1)?;
                        let a2 = s.tape.relu6(x2)?;
                        s.tape.hadamard(a1, a2)?
                    }
                    _ => {
                        let a1 = s.tape.relu6(x1)?;
                        s.tape.hadamard(a1, x2)?
                    }
                };
                let y = b.g.forward(s, mixed)?;
                b.dw2.forward(s, y)
            }
        }
    }

    /// `x + dropout(body(x))` on `[N, C, T]`.
    pub fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> core::result::Result<Var, TensorError> {
        let y = self.body_forward(s, x)?;
        let y = s.dropout(y, self.dropout)?;
        s.tape.add(x, y)
    }
}
