use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::Var;
use crate::ops::{Activation, ConvSpec, BN_EPS};
use crate::params::{fan_in_uniform, BufferId, Mode, ParamId, ParamStore, Session};
use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub spec: ConvSpec,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl ConvLayer {
    /// Weights plus bias, from the spec alone.
    pub fn param_count(&self) -> u64 {
        let b = if self.bias.is_some() { self.spec.out_channels } else { 0 };
        (self.spec.weight_len() + b) as u64
    }

    /// MACs and output spatial extent for one sample with the given input extent.
    pub fn macs(&self, in_spatial: &[usize]) -> Result<(u64, Vec<usize>)> {
        let out = self.spec.output_spatial(in_spatial)?;
        Ok((self.spec.macs(&out), out))
    }

    pub fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> Result<Var> {
        let w = s.param(self.weight)?;
        let b = self.bias.map(|b| s.param(b)).transpose()?;
        s.tape.conv(x, w, b, &self.spec)
    }

    pub fn params(&self) -> Vec<ParamId> {
        core::iter::once(self.weight).chain(self.bias).collect()
    }
}

/// Batch normalization over axis 1.
#[derive(Clone, Debug, PartialEq)]
pub struct NormLayer {
    pub name: String,
    pub channels: usize,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: BufferId,
    pub running_var: BufferId,
}

impl NormLayer {
    pub fn param_count(&self) -> u64 {
        2 * self.channels as u64
    }

    pub fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> Result<Var> {
        let g = s.param(self.gamma)?;
        let b = s.param(self.beta)?;
        let rm = s.buffer(self.running_mean);
        let rv = s.buffer(self.running_var);
        match s.mode() {
            Mode::Train => {
                let (y, upd) = s.tape.batch_norm_train(x, g, b, rm, rv, F::of(BN_EPS))?;
                s.record_running(self.running_mean, self.running_var, upd);
                Ok(y)
            }
            Mode::Eval => s.tape.batch_norm_eval(x, g, b, rm, rv, F::of(BN_EPS)),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        alloc::vec![self.gamma, self.beta]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer {
    pub name: String,
    pub in_features: usize,
    pub out_features: usize,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl LinearLayer {
    pub fn param_count(&self) -> u64 {
        let b = if self.bias.is_some() { self.out_features } else { 0 };
        (self.in_features * self.out_features + b) as u64
    }

    /// MACs per input row.
    pub fn macs(&self) -> u64 {
        (self.in_features * self.out_features) as u64
    }

    pub fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> Result<Var> {
        let w = s.param(self.weight)?;
        let b = self.bias.map(|b| s.param(b)).transpose()?;
        s.tape.linear(x, w, b)
    }

    pub fn params(&self) -> Vec<ParamId> {
        core::iter::once(self.weight).chain(self.bias).collect()
    }
}

/// conv → optional BN → optional activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub conv: ConvLayer,
    pub norm: Option<NormLayer>,
    pub act: Option<Activation>,
}

impl Unit {
    pub fn param_count(&self) -> u64 {
        self.conv.param_count() + self.norm.as_ref().map_or(0, NormLayer::param_count)
    }

    pub fn macs(&self, in_spatial: &[usize]) -> Result<(u64, Vec<usize>)> {
        self.conv.macs(in_spatial)
    }

    pub fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> Result<Var> {
        let mut y = self.conv.forward(s, x)?;
        if let Some(n) = &self.norm {
            y = n.forward(s, y)?;
        }
        if let Some(a) = self.act {
            y = s.tape.activation(y, a)?;
        }
        Ok(y)
    }

    pub fn layers(&self) -> impl Iterator<Item = LayerRef<'_>> {
        core::iter::once(LayerRef::Conv(&self.conv)).chain(self.norm.as_ref().map(LayerRef::Norm))
    }
}

/// Borrowed view of one parameterized layer, for generic traversal.
#[derive(Clone, Copy, Debug)]
pub enum LayerRef<'a> {
    Conv(&'a ConvLayer),
    Norm(&'a NormLayer),
    Linear(&'a LinearLayer),
}

impl LayerRef<'_> {
    pub fn name(&self) -> &str {
        match self {
            LayerRef::Conv(l) => &l.name,
            LayerRef::Norm(l) => &l.name,
            LayerRef::Linear(l) => &l.name,
        }
    }

    pub fn param_count(&self) -> u64 {
        match self {
            LayerRef::Conv(l) => l.param_count(),
            LayerRef::Norm(l) => l.param_count(),
            LayerRef::Linear(l) => l.param_count(),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match self {
            LayerRef::Conv(l) => l.params(),
            LayerRef::Norm(l) => l.params(),
            LayerRef::Linear(l) => l.params(),
        }
    }
}

/// Allocates and initializes layer parameters in a [`ParamStore`].
///
/// Convolution and linear weights and biases are drawn uniformly from
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; batch-norm scale starts at 1, shift at
/// 0, running mean at 0 and running variance at 1.
pub struct LayerFactory<'a, F> {
    store: &'a mut ParamStore<F>,
    rng: ChaCha8Rng,
}

impl<'a, F: Scalar> LayerFactory<'a, F> {
    pub fn new(store: &'a mut ParamStore<F>, seed: u64) -> Self {
        LayerFactory {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn conv(&mut self, name: &str, spec: ConvSpec, bias: bool) -> Result<ConvLayer> {
        spec.validate()?;
        let fan_in = spec.weight_len() / spec.out_channels;
        let w = fan_in_uniform(&spec.weight_shape(), fan_in, &mut self.rng)?;
        let weight = self.store.add_param(format!("{name}.weight"), w);
        let bias = if bias {
            let b = fan_in_uniform(&[spec.out_channels], fan_in, &mut self.rng)?;
            Some(self.store.add_param(format!("{name}.bias"), b))
        } else {
            None
        };
        Ok(ConvLayer {
            name: name.into(),
            spec,
            weight,
            bias,
        })
    }

    pub fn norm(&mut self, name: &str, channels: usize) -> Result<NormLayer> {
        let gamma = self
            .store
            .add_param(format!("{name}.gamma"), Tensor::ones(&[channels])?);
        let beta = self
            .store
            .add_param(format!("{name}.beta"), Tensor::zeros(&[channels])?);
        let running_mean = self
            .store
            .add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[channels])?);
        let running_var = self
            .store
            .add_buffer(format!("{name}.running_var"), Tensor::ones(&[channels])?);
        Ok(NormLayer {
            name: name.into(),
            channels,
            gamma,
            beta,
            running_mean,
            running_var,
        })
    }

    pub fn linear(&mut self, name: &str, in_features: usize, out_features: usize, bias: bool) -> Result<LinearLayer> {
        let w = fan_in_uniform(&[out_features, in_features], in_features, &mut self.rng)?;
        let weight = self.store.add_param(format!("{name}.weight"), w);
        let bias = if bias {
            let b = fan_in_uniform(&[out_features], in_features, &mut self.rng)?;
            Some(self.store.add_param(format!("{name}.bias"), b))
        } else {
            None
        };
        Ok(LinearLayer {
            name: name.into(),
            in_features,
            out_features,
            weight,
            bias,
        })
    }

    /// A conv with optional BN (named `{name}.bn`) and activation.
    pub fn unit(
        &mut self,
        name: &str,
        spec: ConvSpec,
        bias: bool,
        norm: bool,
        act: Option<Activation>,
    ) -> Result<Unit> {
        let channels = spec.out_channels;
        let conv = self.conv(name, spec, bias)?;
        let norm = if norm {
            Some(self.norm(&format!("{name}.bn"), channels)?)
        } else {
            None
        };
        Ok(Unit { conv, norm, act })
    }
}
