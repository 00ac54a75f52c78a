//! Reverse-mode differentiation over a recorded tape of kernel calls.
//!
//! Every differentiable operation appends one node holding its output value.
//! [`GradTape::backward`] walks the nodes in exact reverse order of execution
//! and accumulates gradients additively, so a value feeding several consumers
//! receives the sum of their contributions.

mod gradcheck;

pub use gradcheck::{grad_check, grad_check_store, GradCheckEntry, GradCheckOptions, GradCheckReport};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use crate::ops::conv::{conv_backward, ConvSpec};
use crate::ops::elementwise::{map, Activation};
use crate::ops::norm::{batch_stats, ChannelLayout};
use crate::ops::reduce::{check_lengths, for_each_reduced};
use crate::ops::shape::{inverse_perm, split_at_axis};
use crate::ops::{self};
use crate::scalar::Scalar;
use crate::tensor::{numel, Result, Tensor, TensorError};

static NEXT_TAPE: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a [`GradTape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    idx: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.idx as usize
    }
}

#[derive(Debug)]
enum Op<F> {
    Leaf,
    Conv {
        x: usize,
        w: usize,
        b: Option<usize>,
        spec: ConvSpec,
    },
    BatchNormTrain {
        x: usize,
        gamma: usize,
        beta: usize,
        mean: Vec<F>,
        inv_std: Vec<F>,
    },
    BatchNormEval {
        x: usize,
        gamma: usize,
        beta: usize,
        mean: Vec<F>,
        inv_std: Vec<F>,
    },
    Act {
        x: usize,
        kind: Activation,
    },
    Mul {
        a: usize,
        b: usize,
    },
    MulConst {
        x: usize,
        c: Tensor<F>,
    },
    Add {
        a: usize,
        b: usize,
    },
    Scale {
        x: usize,
        factor: F,
    },
    Concat {
        xs: Vec<usize>,
        axis: usize,
    },
    Narrow {
        x: usize,
        axis: usize,
        start: usize,
    },
    Reshape {
        x: usize,
    },
    Permute {
        x: usize,
        perm: Vec<usize>,
    },
    Mean {
        x: usize,
        axes: Vec<usize>,
    },
    MaskedTimeMean {
        x: usize,
        lens: Vec<usize>,
    },
    Linear {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    Softmax {
        x: usize,
        axis: usize,
    },
    LogSoftmax {
        x: usize,
        axis: usize,
    },
    Sum {
        x: usize,
    },
    SoftCrossEntropy {
        logits: usize,
        targets: Tensor<F>,
        probs: Tensor<F>,
    },
}

#[derive(Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    requires_grad: bool,
}

/// Running statistics produced by a training-mode batch norm.
#[derive(Clone, Debug)]
pub struct RunningUpdate<F> {
    pub mean: Tensor<F>,
    pub var: Tensor<F>,
}

/// Single-owner record of executed operations.
#[derive(Debug)]
pub struct GradTape<F> {
    id: u32,
    nodes: Vec<Node<F>>,
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Scalar> Default for GradTape<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn accumulate<F: Scalar>(slot: &mut Option<Tensor<F>>, g: Tensor<F>) {
    match slot {
        Some(acc) => {
            for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

impl<F: Scalar> GradTape<F> {
    pub fn new() -> Self {
        GradTape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    /// Number of recorded nodes (leaves included).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn resolve(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index() >= self.nodes.len() {
            return Err(TensorError::TapeGap);
        }
        Ok(v.index())
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, requires_grad: bool) -> Var {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            idx: idx as u32,
        }
    }

    fn rg(&self, idx: &[usize]) -> bool {
        idx.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Records an input value. Non-finite data is rejected.
    pub fn leaf(&mut self, value: Tensor<F>, requires_grad: bool) -> Result<Var> {
        value.ensure_finite("leaf")?;
        Ok(self.push(value, Op::Leaf, requires_grad))
    }

    pub fn value(&self, v: Var) -> Result<&Tensor<F>> {
        Ok(&self.nodes[self.resolve(v)?].value)
    }

    pub fn shape(&self, v: Var) -> Result<&[usize]> {
        Ok(self.value(v)?.shape())
    }

    pub fn conv(&mut self, x: Var, w: Var, b: Option<Var>, spec: &ConvSpec) -> Result<Var> {
        let (xi, wi) = (self.resolve(x)?, self.resolve(w)?);
        let bi = b.map(|b| self.resolve(b)).transpose()?;
        let out = ops::conv(
            &self.nodes[xi].value,
            &self.nodes[wi].value,
            bi.map(|i| &self.nodes[i].value),
            spec,
        )?;
        let mut deps = vec![xi, wi];
        deps.extend(bi);
        let rg = self.rg(&deps);
        Ok(self.push(
            out,
            Op::Conv {
                x: xi,
                w: wi,
                b: bi,
                spec: spec.clone(),
            },
            rg,
        ))
    }

    /// Training-mode batch norm; also returns the blended running statistics.
    pub fn batch_norm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &Tensor<F>,
        running_var: &Tensor<F>,
        eps: F,
    ) -> Result<(Var, RunningUpdate<F>)> {
        let (xi, gi, bi) = (self.resolve(x)?, self.resolve(gamma)?, self.resolve(beta)?);
        let out = ops::batch_norm(
            &self.nodes[xi].value,
            &self.nodes[gi].value,
            &self.nodes[bi].value,
            running_mean,
            running_var,
            eps,
            true,
        )?;
        let (stats, _) = batch_stats(&self.nodes[xi].value, eps)?;
        let (mean, var) = out.running.expect("training mode yields running stats");
        let rg = self.rg(&[xi, gi, bi]);
        let v = self.push(
            out.output,
            Op::BatchNormTrain {
                x: xi,
                gamma: gi,
                beta: bi,
                mean: stats.mean,
                inv_std: stats.inv_std,
            },
            rg,
        );
        Ok((v, RunningUpdate { mean, var }))
    }

    /// Inference-mode batch norm with fixed running statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &Tensor<F>,
        running_var: &Tensor<F>,
        eps: F,
    ) -> Result<Var> {
        let (xi, gi, bi) = (self.resolve(x)?, self.resolve(gamma)?, self.resolve(beta)?);
        let out = ops::batch_norm(
            &self.nodes[xi].value,
            &self.nodes[gi].value,
            &self.nodes[bi].value,
            running_mean,
            running_var,
            eps,
            false,
        )?;
        let inv_std = running_var
            .data()
            .iter()
            .map(|&v| F::one() / (v + eps).sqrt())
            .collect();
        let rg = self.rg(&[xi, gi, bi]);
        Ok(self.push(
            out.output,
            Op::BatchNormEval {
                x: xi,
                gamma: gi,
                beta: bi,
                mean: running_mean.data().to_vec(),
                inv_std,
            },
            rg,
        ))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::activation(&self.nodes[xi].value, kind);
        let rg = self.rg(&[xi]);
        Ok(self.push(out, Op::Act { x: xi, kind }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Relu)
    }

    pub fn relu6(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Relu6)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.resolve(a)?, self.resolve(b)?);
        let out = ops::hadamard(&self.nodes[ai].value, &self.nodes[bi].value)?;
        let rg = self.rg(&[ai, bi]);
        Ok(self.push(out, Op::Mul { a: ai, b: bi }, rg))
    }

    /// Elementwise product with a constant tensor (e.g. a dropout mask).
    pub fn mul_const(&mut self, x: Var, c: Tensor<F>) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::hadamard(&self.nodes[xi].value, &c)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(out, Op::MulConst { x: xi, c }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.resolve(a)?, self.resolve(b)?);
        let out = ops::add(&self.nodes[ai].value, &self.nodes[bi].value)?;
        let rg = self.rg(&[ai, bi]);
        Ok(self.push(out, Op::Add { a: ai, b: bi }, rg))
    }

    pub fn scale(&mut self, x: Var, factor: F) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::scale(&self.nodes[xi].value, factor)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(out, Op::Scale { x: xi, factor }, rg))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let idx = xs.iter().map(|&v| self.resolve(v)).collect::<Result<Vec<_>>>()?;
        let parts: Vec<&Tensor<F>> = idx.iter().map(|&i| &self.nodes[i].value).collect();
        let out = ops::concat(&parts, axis)?;
        let rg = self.rg(&idx);
        Ok(self.push(out, Op::Concat { xs: idx, axis }, rg))
    }

    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::narrow(&self.nodes[xi].value, axis, start, len)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(out, Op::Narrow { x: xi, axis, start }, rg))
    }

    pub fn chunk(&mut self, x: Var, parts: usize, axis: usize) -> Result<Vec<Var>> {
        let shape = self.shape(x)?.to_vec();
        if axis >= shape.len() {
            return Err(TensorError::AxisOutOfRange {
                op: "chunk",
                axis,
                rank: shape.len(),
            });
        }
        if parts == 0 || shape[axis] % parts != 0 {
            return Err(TensorError::Divisibility {
                op: "chunk",
                size: shape[axis],
                parts,
            });
        }
        let len = shape[axis] / parts;
        (0..parts).map(|i| self.narrow(x, axis, i * len, len)).collect()
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = self.nodes[xi].value.clone().reshape(shape)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(out, Op::Reshape { x: xi }, rg))
    }

    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::permute(&self.nodes[xi].value, perm)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(
            out,
            Op::Permute {
                x: xi,
                perm: perm.to_vec(),
            },
            rg,
        ))
    }

    pub fn mean_axes(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::mean_axes(&self.nodes[xi].value, axes)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(
            out,
            Op::Mean {
                x: xi,
                axes: axes.to_vec(),
            },
            rg,
        ))
    }

    pub fn masked_time_mean(&mut self, x: Var, valid_len: &[usize]) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::masked_time_mean(&self.nodes[xi].value, valid_len)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(
            out,
            Op::MaskedTimeMean {
                x: xi,
                lens: valid_len.to_vec(),
            },
            rg,
        ))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xi, wi) = (self.resolve(x)?, self.resolve(w)?);
        let bi = b.map(|b| self.resolve(b)).transpose()?;
        let out = ops::linear(
            &self.nodes[xi].value,
            &self.nodes[wi].value,
            bi.map(|i| &self.nodes[i].value),
        )?;
        let mut deps = vec![xi, wi];
        deps.extend(bi);
        let rg = self.rg(&deps);
        Ok(self.push(out, Op::Linear { x: xi, w: wi, b: bi }, rg))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::softmax(&self.nodes[xi].value, axis)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(out, Op::Softmax { x: xi, axis }, rg))
    }

    pub fn log_softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::log_softmax(&self.nodes[xi].value, axis)?;
        let rg = self.rg(&[xi]);
        Ok(self.push(out, Op::LogSoftmax { x: xi, axis }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let xi = self.resolve(x)?;
        let out = ops::sum(&self.nodes[xi].value);
        out.ensure_finite("sum")?;
        let rg = self.rg(&[xi]);
        Ok(self.push(out, Op::Sum { x: xi }, rg))
    }

    /// Mean over the batch of `-sum_k targets[n, k] * log_softmax(logits)[n, k]`.
    pub fn soft_cross_entropy(&mut self, logits: Var, targets: &Tensor<F>) -> Result<Var> {
        let li = self.resolve(logits)?;
        let z = &self.nodes[li].value;
        if z.rank() != 2 || z.shape() != targets.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "soft_cross_entropy",
                detail: format!("logits {:?} vs targets {:?}", z.shape(), targets.shape()),
            });
        }
        let logp = ops::log_softmax(z, 1)?;
        let n = F::of(z.shape()[0] as f64);
        let mut loss = F::zero();
        for (&t, &lp) in targets.data().iter().zip(logp.data()) {
            loss -= t * lp;
        }
        let loss = Tensor::scalar(loss / n);
        loss.ensure_finite("soft_cross_entropy")?;
        let probs = map(&logp, |v| v.exp());
        let rg = self.rg(&[li]);
        Ok(self.push(
            loss,
            Op::SoftCrossEntropy {
                logits: li,
                targets: targets.clone(),
                probs,
            },
            rg,
        ))
    }

    /// Gradient of the last `backward` target(s) with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor<F>> {
        let i = self.resolve(v).ok()?;
        self.grads.get(i)?.as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
    }

    /// Accumulates `d(loss)/d(v)` into every recorded value that requires
    /// gradients. Calling it again without [`zero_grad`](Self::zero_grad)
    /// adds to the stored gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let li = self.resolve(loss)?;
        let lv = &self.nodes[li].value;
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut g: Vec<Option<Tensor<F>>> = (0..=li).map(|_| None).collect();
        g[li] = Some(Tensor::full(lv.shape(), F::one())?);
        for i in (0..=li).rev() {
            let Some(gi) = g[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &gi, &mut g)?;
            if self.grads.len() < self.nodes.len() {
                self.grads.resize_with(self.nodes.len(), || None);
            }
            accumulate(&mut self.grads[i], gi);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, gy: &Tensor<F>, g: &mut [Option<Tensor<F>>]) -> Result<()> {
        let node = &self.nodes[i];
        let val = |j: usize| &self.nodes[j].value;
        let need = |j: usize| self.nodes[j].requires_grad;
        let mut send = |j: usize, t: Tensor<F>| {
            if self.nodes[j].requires_grad {
                accumulate(&mut g[j], t);
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv { x, w, b, spec } => {
                let r = conv_backward(val(*x), val(*w), spec, gy, [need(*x), need(*w), b.is_some_and(need)])?;
                if let Some(t) = r.input {
                    send(*x, t);
                }
                if let Some(t) = r.weight {
                    send(*w, t);
                }
                if let (Some(b), Some(t)) = (b, r.bias) {
                    send(*b, t);
                }
            }
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                mean,
                inv_std,
            } => {
                let xv = val(*x);
                let l = ChannelLayout::of(xv.shape(), "batch_norm")?;
                let (xd, gd) = (xv.data(), gy.data());
                let gam = val(*gamma).data();
                let m = F::of(l.count() as f64);
                let mut dx = vec![F::zero(); xd.len()];
                let mut dgam = vec![F::zero(); l.channels];
                let mut dbet = vec![F::zero(); l.channels];
                for c in 0..l.channels {
                    let (mu, is) = (mean[c], inv_std[c]);
                    let (mut sdy, mut sdyx) = (F::zero(), F::zero());
                    l.for_channel(c, |k| {
                        sdy += gd[k];
                        sdyx += gd[k] * (xd[k] - mu) * is;
                    });
                    dgam[c] = sdyx;
                    dbet[c] = sdy;
                    // dxhat = dy * gamma, so the sums scale by gamma
                    let coef = gam[c] * is / m;
                    l.for_channel(c, |k| {
                        let xh = (xd[k] - mu) * is;
                        dx[k] = coef * (m * gd[k] - sdy - xh * sdyx);
                    });
                }
                send(*x, Tensor::from_parts(xv.shape().to_vec(), dx));
                send(*gamma, Tensor::from_parts(vec![l.channels], dgam));
                send(*beta, Tensor::from_parts(vec![l.channels], dbet));
            }
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                mean,
                inv_std,
            } => {
                let xv = val(*x);
                let l = ChannelLayout::of(xv.shape(), "batch_norm")?;
                let (xd, gd) = (xv.data(), gy.data());
                let gam = val(*gamma).data();
                let mut dx = vec![F::zero(); xd.len()];
                let mut dgam = vec![F::zero(); l.channels];
                let mut dbet = vec![F::zero(); l.channels];
                for c in 0..l.channels {
                    let (mu, is) = (mean[c], inv_std[c]);
                    let s = gam[c] * is;
                    l.for_channel(c, |k| {
                        dx[k] = gd[k] * s;
                        dgam[c] += gd[k] * (xd[k] - mu) * is;
                        dbet[c] += gd[k];
                    });
                }
                send(*x, Tensor::from_parts(xv.shape().to_vec(), dx));
                send(*gamma, Tensor::from_parts(vec![l.channels], dgam));
                send(*beta, Tensor::from_parts(vec![l.channels], dbet));
            }
            Op::Act { x, kind } => {
                let xv = val(*x);
                let d = xv
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&a, &gv)| gv * kind.derivative(a))
                    .collect();
                send(*x, Tensor::from_parts(xv.shape().to_vec(), d));
            }
            Op::Mul { a, b } => {
                let (av, bv) = (val(*a), val(*b));
                let da = ops::hadamard(gy, bv)?;
                let db = ops::hadamard(gy, av)?;
                send(*a, da);
                send(*b, db);
            }
            Op::MulConst { x, c } => send(*x, ops::hadamard(gy, c)?),
            Op::Add { a, b } => {
                send(*a, gy.clone());
                send(*b, gy.clone());
            }
            Op::Scale { x, factor } => send(*x, map(gy, |v| v * *factor)),
            Op::Concat { xs, axis } => {
                let mut start = 0;
                for &j in xs {
                    let len = val(j).shape()[*axis];
                    send(j, ops::narrow(gy, *axis, start, len)?);
                    start += len;
                }
            }
            Op::Narrow { x, axis, start } => {
                let xv = val(*x);
                let (outer, a, inner) = split_at_axis(xv.shape(), *axis);
                let len = gy.shape()[*axis];
                let mut d = vec![F::zero(); xv.len()];
                for o in 0..outer {
                    let dst = (o * a + start) * inner;
                    d[dst..dst + len * inner].copy_from_slice(&gy.data()[o * len * inner..(o + 1) * len * inner]);
                }
                send(*x, Tensor::from_parts(xv.shape().to_vec(), d));
            }
            Op::Reshape { x } => send(*x, gy.clone().reshape(val(*x).shape())?),
            Op::Permute { x, perm } => send(*x, ops::permute(gy, &inverse_perm(perm))?),
            Op::Mean { x, axes } => {
                let xv = val(*x);
                let shape = xv.shape();
                let mut reduce = vec![false; shape.len()];
                for &a in axes {
                    reduce[a] = true;
                }
                let count: usize = axes.iter().map(|&a| shape[a]).product();
                let inv = F::one() / F::of(count as f64);
                let mut d = vec![F::zero(); xv.len()];
                for_each_reduced(shape, &reduce, |src, dst| d[src] = gy.data()[dst] * inv);
                send(*x, Tensor::from_parts(shape.to_vec(), d));
            }
            Op::MaskedTimeMean { x, lens } => {
                let xv = val(*x);
                let (n, c, t) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                check_lengths(lens, n, t)?;
                let mut d = vec![F::zero(); xv.len()];
                for b in 0..n {
                    let inv = F::one() / F::of(lens[b] as f64);
                    for ch in 0..c {
                        let gv = gy.data()[b * c + ch] * inv;
                        d[(b * c + ch) * t..][..lens[b]].fill(gv);
                    }
                }
                send(*x, Tensor::from_parts(xv.shape().to_vec(), d));
            }
            Op::Linear { x, w, b } => {
                let (xv, wv) = (val(*x), val(*w));
                let (out_f, in_f) = (wv.shape()[0], wv.shape()[1]);
                let n = xv.len() / in_f;
                let (xd, wd, gd) = (xv.data(), wv.data(), gy.data());
                if need(*x) {
                    let mut dx = vec![F::zero(); xv.len()];
                    for r in 0..n {
                        for o in 0..out_f {
                            let gv = gd[r * out_f + o];
                            for k in 0..in_f {
                                dx[r * in_f + k] += gv * wd[o * in_f + k];
                            }
                        }
                    }
                    send(*x, Tensor::from_parts(xv.shape().to_vec(), dx));
                }
                if need(*w) {
                    let mut dw = vec![F::zero(); wv.len()];
                    for r in 0..n {
                        for o in 0..out_f {
                            let gv = gd[r * out_f + o];
                            for k in 0..in_f {
                                dw[o * in_f + k] += gv * xd[r * in_f + k];
                            }
                        }
                    }
                    send(*w, Tensor::from_parts(wv.shape().to_vec(), dw));
                }
                if let Some(b) = b {
                    let mut db = vec![F::zero(); out_f];
                    for r in 0..n {
                        for o in 0..out_f {
                            db[o] += gd[r * out_f + o];
                        }
                    }
                    send(*b, Tensor::from_parts(vec![out_f], db));
                }
            }
            Op::Softmax { x, axis } => {
                let y = &node.value;
                let (outer, a, inner) = split_at_axis(y.shape(), *axis);
                let mut d = vec![F::zero(); y.len()];
                for o in 0..outer {
                    for k in 0..inner {
                        let at = |j: usize| (o * a + j) * inner + k;
                        let mut dot = F::zero();
                        for j in 0..a {
                            dot += gy.data()[at(j)] * y.data()[at(j)];
                        }
                        for j in 0..a {
                            d[at(j)] = y.data()[at(j)] * (gy.data()[at(j)] - dot);
                        }
                    }
                }
                send(*x, Tensor::from_parts(y.shape().to_vec(), d));
            }
            Op::LogSoftmax { x, axis } => {
                let y = &node.value;
                let (outer, a, inner) = split_at_axis(y.shape(), *axis);
                let mut d = vec![F::zero(); y.len()];
                for o in 0..outer {
                    for k in 0..inner {
                        let at = |j: usize| (o * a + j) * inner + k;
                        let mut s = F::zero();
                        for j in 0..a {
                            s += gy.data()[at(j)];
                        }
                        for j in 0..a {
                            d[at(j)] = gy.data()[at(j)] - y.data()[at(j)].exp() * s;
                        }
                    }
                }
                send(*x, Tensor::from_parts(y.shape().to_vec(), d));
            }
            Op::Sum { x } => {
                let gv = gy.data()[0];
                send(*x, Tensor::full(val(*x).shape(), gv)?);
            }
            Op::SoftCrossEntropy { logits, targets, probs } => {
                let (n, k) = (probs.shape()[0], probs.shape()[1]);
                let scale = gy.data()[0] / F::of(n as f64);
                let mut d = vec![F::zero(); probs.len()];
                for r in 0..n {
                    let row = r * k..(r + 1) * k;
                    let mut tsum = F::zero();
                    for &t in &targets.data()[row.clone()] {
                        tsum += t;
                    }
                    for j in row {
                        d[j] = scale * (probs.data()[j] * tsum - targets.data()[j]);
                    }
                }
                send(*logits, Tensor::from_parts(probs.shape().to_vec(), d));
            }
        }
        debug_assert!(numel(gy.shape()) == node.value.len());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let mut tape = GradTape::new();
        let x = tape.leaf(t(&[3], &[1.0, -2.0, 5.0]), true).unwrap();
        let l = tape.sum(x).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn grad_of_square_sum_is_two_x() {
        let mut tape = GradTape::new();
        let x = tape.leaf(t(&[3], &[1.0, -2.0, 5.0]), true).unwrap();
        let sq = tape.hadamard(x, x).unwrap();
        let l = tape.sum(sq).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, -4.0, 10.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut tape = GradTape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]), true).unwrap();
        let l = tape.sum(x).unwrap();
        tape.backward(l).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 2.0]);
        tape.zero_grad();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn foreign_var_is_a_tape_gap() {
        let mut a = GradTape::<f64>::new();
        let mut b = GradTape::<f64>::new();
        let x = a.leaf(t(&[1], &[1.0]), true).unwrap();
        assert_eq!(b.sum(x).unwrap_err(), TensorError::TapeGap);
        assert_eq!(b.backward(x).unwrap_err(), TensorError::TapeGap);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = GradTape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]), true).unwrap();
        assert!(matches!(tape.backward(x), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = GradTape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]), true).unwrap();
        let c = tape.leaf(t(&[2], &[3.0, 4.0]), false).unwrap();
        let y = tape.hadamard(x, c).unwrap();
        let l = tape.sum(y).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[3.0, 4.0]);
        assert!(tape.grad(c).is_none());
    }

    #[test]
    fn soft_cross_entropy_gradient_is_p_minus_t() {
        let mut tape = GradTape::new();
        let z = tape.leaf(t(&[1, 2], &[0.0, 0.0]), true).unwrap();
        let l = tape.soft_cross_entropy(z, &t(&[1, 2], &[1.0, 0.0])).unwrap();
        assert!((tape.value(l).unwrap().data()[0] - core::f64::consts::LN_2).abs() < 1e-15);
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(z).unwrap().data(), &[-0.5, 0.5]);
    }
}
