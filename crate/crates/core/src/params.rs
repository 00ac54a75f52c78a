//! Parameter storage, initialization, and the per-pass forward [`Session`].

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{GradTape, RunningUpdate, Var};
use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BufferId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl BufferId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor<F> {
    pub name: String,
    pub tensor: Tensor<F>,
}

/// Ordered registry of trainable parameters and non-trainable buffers
/// (batch-norm running statistics).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<F> {
    params: Vec<NamedTensor<F>>,
    buffers: Vec<NamedTensor<F>>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            buffers: Vec::new(),
        }
    }

    pub fn add_param(&mut self, name: impl Into<String>, tensor: Tensor<F>) -> ParamId {
        self.params.push(NamedTensor {
            name: name.into(),
            tensor,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, tensor: Tensor<F>) -> BufferId {
        self.buffers.push(NamedTensor {
            name: name.into(),
            tensor,
        });
        BufferId(self.buffers.len() - 1)
    }

    pub fn param(&self, id: ParamId) -> &Tensor<F> {
        &self.params[id.0].tensor
    }

    pub fn param_name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn buffer(&self, id: BufferId) -> &Tensor<F> {
        &self.buffers[id.0].tensor
    }

    pub fn params(&self) -> &[NamedTensor<F>] {
        &self.params
    }

    pub fn buffers(&self) -> &[NamedTensor<F>] {
        &self.buffers
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn buffer_ids(&self) -> impl Iterator<Item = BufferId> {
        (0..self.buffers.len()).map(BufferId)
    }

    pub(crate) fn param_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.params[id.0].tensor
    }

    /// Replaces a parameter value; the shape must not change.
    pub fn set_param(&mut self, id: ParamId, tensor: Tensor<F>) -> Result<()> {
        check_same_shape(&self.params[id.0].tensor, &tensor)?;
        self.params[id.0].tensor = tensor;
        Ok(())
    }

    pub fn set_buffer(&mut self, id: BufferId, tensor: Tensor<F>) -> Result<()> {
        check_same_shape(&self.buffers[id.0].tensor, &tensor)?;
        self.buffers[id.0].tensor = tensor;
        Ok(())
    }

    /// Total number of trainable scalars in the registry.
    pub fn num_params(&self) -> u64 {
        self.params.iter().map(|p| p.tensor.len() as u64).sum()
    }

    pub fn cast<G: Scalar>(&self) -> ParamStore<G> {
        let conv = |v: &[NamedTensor<F>]| {
            v.iter()
                .map(|n| NamedTensor {
                    name: n.name.clone(),
                    tensor: n.tensor.cast(),
                })
                .collect()
        };
        ParamStore {
            params: conv(&self.params),
            buffers: conv(&self.buffers),
        }
    }

    /// Bitwise equality of names, shapes and values.
    pub fn bit_eq(&self, other: &ParamStore<F>) -> bool {
        let eq = |a: &[NamedTensor<F>], b: &[NamedTensor<F>]| {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| x.name == y.name && x.tensor.bit_eq(&y.tensor))
        };
        eq(&self.params, &other.params) && eq(&self.buffers, &other.buffers)
    }
}

fn check_same_shape<F: Scalar>(old: &Tensor<F>, new: &Tensor<F>) -> Result<()> {
    if old.shape() != new.shape() {
        return Err(crate::tensor::TensorError::ShapeMismatch {
            op: "set",
            detail: alloc::format!("{:?} -> {:?}", old.shape(), new.shape()),
        });
    }
    new.ensure_finite("set")
}

/// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn fan_in_uniform<F: Scalar>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Result<Tensor<F>> {
    let bound = 1.0 / num_traits::Float::sqrt(fan_in.max(1) as f64);
    Tensor::from_fn(shape, |_| F::of(rng.random_range(-bound..bound)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, dropout active, running statistics updated.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

/// State of one forward (and optional backward) pass over a [`ParamStore`].
///
/// Parameters are recorded on the tape lazily, once each. Running-statistic
/// updates produced in training mode are collected and applied to the store
/// by the caller after the pass.
pub struct Session<'a, F: Scalar> {
    pub tape: GradTape<F>,
    store: &'a ParamStore<F>,
    vars: Vec<Option<Var>>,
    mode: Mode,
    track_grads: bool,
    dropout_override: Option<f64>,
    rng: ChaCha8Rng,
    updates: Vec<(BufferId, Tensor<F>)>,
}

impl<'a, F: Scalar> Session<'a, F> {
    pub fn new(store: &'a ParamStore<F>, mode: Mode, seed: u64) -> Self {
        Session {
            tape: GradTape::new(),
            store,
            vars: alloc::vec![None; store.params.len()],
            mode,
            track_grads: mode == Mode::Train,
            dropout_override: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            updates: Vec::new(),
        }
    }

    pub fn eval(store: &'a ParamStore<F>) -> Self {
        Self::new(store, Mode::Eval, 0)
    }

    /// Overrides every block's dropout rate for this pass.
    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_override = Some(rate);
        self
    }

    /// Records parameters as gradient-tracking leaves (default in training mode).
    pub fn with_grads(mut self, track: bool) -> Self {
        self.track_grads = track;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn store(&self) -> &'a ParamStore<F> {
        self.store
    }

    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        if let Some(v) = self.vars[id.0] {
            return Ok(v);
        }
        let v = self.tape.leaf(self.store.param(id).clone(), self.track_grads)?;
        self.vars[id.0] = Some(v);
        Ok(v)
    }

    pub fn buffer(&self, id: BufferId) -> &'a Tensor<F> {
        self.store.buffer(id)
    }

    pub fn input(&mut self, t: Tensor<F>) -> Result<Var> {
        self.tape.leaf(t, false)
    }

    pub(crate) fn record_running(&mut self, mean: BufferId, var: BufferId, u: RunningUpdate<F>) {
        self.updates.push((mean, u.mean));
        self.updates.push((var, u.var));
    }

    /// Inverted dropout: active only in training mode with a positive rate.
    pub fn dropout(&mut self, x: Var, rate: f64) -> Result<Var> {
        let rate = self.dropout_override.unwrap_or(rate);
        if self.mode != Mode::Train || rate <= 0.0 {
            return Ok(x);
        }
        let shape = self.tape.shape(x)?.to_vec();
        let keep = F::of(1.0 / (1.0 - rate));
        let rng = &mut self.rng;
        let mask = Tensor::from_fn(&shape, |_| if rng.random::<f64>() < rate { F::zero() } else { keep })?;
        self.tape.mul_const(x, mask)
    }

    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.tape.backward(loss)
    }

    /// Gradient of the loss with respect to a parameter, if it took part.
    pub fn param_grad(&self, id: ParamId) -> Option<&Tensor<F>> {
        self.vars[id.0].and_then(|v| self.tape.grad(v))
    }

    /// Running-statistic updates recorded during the pass, in execution order.
    pub fn into_updates(self) -> Vec<(BufferId, Tensor<F>)> {
        self.updates
    }
}

impl<F: Scalar> ParamStore<F> {
    pub fn apply_updates(&mut self, updates: Vec<(BufferId, Tensor<F>)>) -> Result<()> {
        for (id, t) in updates {
            self.set_buffer(id, t)?;
        }
        Ok(())
    }
}
